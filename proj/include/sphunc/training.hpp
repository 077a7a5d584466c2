#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sphunc/data.hpp"
#include "sphunc/scm.hpp"
#include "sphunc/sphere.hpp"
#include "sphunc/uncertainty.hpp"

// Composite objective, stochastic optimization loop, gradient verification
// and the block-coordinate mode used by the convergence test.
namespace sphunc {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LossWeights {
  double lambda1 = 0.1;   // entropy-calibration weight
  double lambda2 = 0.01;  // causal-regularization weight
};

struct LayerParams {
  double log_kappa_a = 0.0;  // attention temperature, kappa_a = exp(log_kappa_a)
  Eigen::MatrixXd W_c;       // D x D causal projection

  double kappa_a() const { return std::exp(log_kappa_a); }
};

// Structural coefficient of one directed edge (gate-weighted in the loss).
struct EdgeCoeff {
  int src = 0;
  int dst = 0;
  double value = 1.0;  // frozen-gate mode: trainable coefficient c_ij
  double raw = 0.0;    // trainable-gate mode: gamma_ij = sigmoid(raw)
};

struct ModelParams {
  Eigen::MatrixXd W;  // D x d spherical projection
  Eigen::VectorXd b;
  KappaHead kappa_head;
  std::vector<LayerParams> layers;

  std::vector<std::vector<int>> parents;  // node -> parent ids
  GateTable gates;                        // frozen Granger-score gates
  std::vector<EdgeCoeff> edge_coeffs;     // one per (src, dst) structure edge
  bool gates_trainable = false;

  AleatoricParams alea;
  FusionParams fusion;

  Eigen::MatrixXd readout_W;  // n_out x D
  Eigen::VectorXd readout_b;
  bool classification = false;

  int latent_dim() const { return static_cast<int>(W.rows()); }
  int feat_dim() const { return static_cast<int>(W.cols()); }
  int n_outputs() const { return static_cast<int>(readout_W.rows()); }

  // Effective multiplier of edge k's causal message and the L1 penalty base.
  double edge_scale(std::size_t k) const;
};

struct TrainConfig {
  double lr = 5e-4;
  int batch = 256;  // items (node, t) per minibatch
  int epochs = 10;
  double weight_decay = 0.01;
  double dropout = 0.3;
  int mp_layers = 3;
  int d_sphere = 16;  // desk-scale default (128 at full scale)
  int mc_samples = 100;
  int structure_epochs = 20;
  int sparsity_s = 2;
  int kappa_hidden = 16;
  int alea_hidden = 64;
  int fusion_hidden = 8;
  int proxy_window = 10;
  bool learn_structure = true;
  bool gates_trainable = false;
  bool deterministic = true;
};

struct LossParts {
  double total = 0.0;
  double pred = 0.0;
  double entropy = 0.0;
  double causal = 0.0;
};

// One minibatch: a set of timesteps plus the frozen empirical proxy.
struct Batch {
  const TemporalHypergraph* data = nullptr;
  std::vector<int> timesteps;
  Eigen::MatrixXd proxy;  // T x N, NaN where no target
  double dropout = 0.0;   // applied to features when > 0
  std::uint64_t dropout_seed = 0;
};

ModelParams init_model(const TrainConfig& config, int feat_dim, int n_outputs,
                       bool classification, std::uint64_t seed);

// Encoder-only pass (no dropout): per-node latent series for structure
// learning and SCM fitting.
LatentSeries encode_series(const ModelParams& params,
                           const TemporalHypergraph& data);

// Composite objective; forward only.
LossParts composite_loss(const ModelParams& params, const Batch& batch,
                         const LossWeights& weights);

// Forward + analytic backward; returns the loss parts and fills `grad`
// (flat, aligned with flatten()).
LossParts loss_and_grad(const ModelParams& params, const Batch& batch,
                        const LossWeights& weights, Eigen::VectorXd* grad);

Eigen::VectorXd flatten(const ModelParams& params);
void unflatten(const Eigen::VectorXd& v, ModelParams& params);

// Max relative error between analytic and central-difference gradients over
// n_coords randomly chosen coordinates (absolute error below 1e-6 magnitude).
double grad_check(const ModelParams& params, const Batch& batch,
                  const LossWeights& weights, int n_coords = 200,
                  std::uint64_t seed = 0);

struct UncertaintyRow {
  int t = 0;
  int node = 0;
  UncertaintyReport report;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossParts> trace;            // one row per epoch
  std::vector<EdgeScore> edge_scores;      // last structure-learning pass
  double lasso_lambda = 0.0;
  std::vector<UncertaintyRow> uncertainty;  // final pass over held-out items
};

// warm_start resumes from existing parameters (structure included) instead
// of a fresh initialization.
TrainResult train(const TrainConfig& config, const TemporalHypergraph& data,
                  const LossWeights& weights, std::uint64_t seed,
                  const ModelParams* warm_start = nullptr);

// Per-(t, node) predictions with uncertainty decomposition, eval mode.
std::vector<UncertaintyRow> evaluate_uncertainty(const ModelParams& params,
                                                 const TemporalHypergraph& data,
                                                 int proxy_window = 10);

// Class probabilities / regression outputs for every valid item.
struct Prediction {
  int t = 0;
  int node = 0;
  Eigen::VectorXd output;  // probabilities (classification) or value
  double target = 0.0;
};
std::vector<Prediction> predict(const ModelParams& params,
                                const TemporalHypergraph& data);

// Block-coordinate descent in the convex-heads configuration: frozen
// encoder/latents, linear readout, linear aleatoric head, affine fusion.
// Every block update is an exact least-squares minimizer, so the full-batch
// objective is non-increasing along the returned trace.
enum class BcdBlock { kReadout, kAleatoric, kFusion };

struct BcdConfig {
  std::vector<BcdBlock> blocks = {BcdBlock::kReadout, BcdBlock::kAleatoric,
                                  BcdBlock::kFusion};
  int max_cycles = 40;
  double tol = 1e-12;
};

struct BcdResult {
  std::vector<double> objective;  // value after each block update
  Eigen::VectorXd readout_w;
  double readout_b = 0.0;
  Eigen::VectorXd alea_w;
  double alea_b = 0.0;
  double fuse_const = 0.0, fuse_epi = 0.0, fuse_alea = 0.0;
};

BcdResult block_coordinate_train(const ModelParams& frozen,
                                 const TemporalHypergraph& data,
                                 const LossWeights& weights,
                                 const BcdConfig& config);

}  // namespace sphunc
