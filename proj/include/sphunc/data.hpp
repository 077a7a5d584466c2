#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sphunc/scm.hpp"
#include "sphunc/sphere.hpp"

// Synthetic ground-truth generators, dataset serialization and evaluation
// metrics.
namespace sphunc {

struct TemporalHypergraph {
  int n_nodes = 0;
  int timesteps = 0;
  int feat_dim = 0;
  int horizon = 1;  // prediction offset Delta
  bool classification = false;
  int n_classes = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> features;           // per t: d x N
  std::vector<std::vector<Hyperedge>> hyperedges;  // per t
  // T x N; regression values or class labels; NaN marks "no target".
  Eigen::MatrixXd targets;

  bool has_target(int t, int node) const {
    return std::isfinite(targets(t, node));
  }
};

enum class TargetMode { kDirect, kForecast };

struct SyntheticSpec {
  int n_nodes = 30;
  int timesteps = 200;
  int feat_dim = 24;
  int latent_dim = 16;
  int sparsity = 2;             // |Pa(i)| <= s
  double coupling = 1.0;        // structural edge strength
  double self_coupling = 0.0;   // momentum term h_{t-1}^i -> h_t^i
  double noise_kappa = 50.0;    // vMF transition noise
  double exo_strength = 0.4;    // persistent prior bias
  double obs_noise = 0.05;      // feature observation noise
  double hyperedge_rate = 0.3;  // hyperedges per node per step
  int horizon = 1;
  TargetMode target_mode = TargetMode::kDirect;
  bool classification = false;
  int n_classes = 2;
  double alea_base = 0.1;   // sigma^2(x) = alea_base + (alea_scale * x_1)^2
  double alea_scale = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  TemporalHypergraph graph;
  ScmModel truth;
  std::vector<std::pair<int, int>> true_edges;
  std::vector<Eigen::MatrixXd> latents;  // per t: D x N ground-truth states
  Eigen::MatrixXd obs_map;               // d x D feature map
  Eigen::VectorXd target_w;              // regression mean m(x) = w.x + c
  double target_c = 0.0;
};

// Simulates the true SCM, observes features as noisy linear images of the
// latents, draws targets with heteroscedastic orthogonal noise and samples
// hyperedges as angular-proximity groups.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

// Expected calibration error with equal-width bins over [0, 1].
double ece(const std::vector<double>& confidences,
           const std::vector<int>& correctness, int k_bins = 15);

struct CalibrationBins {
  int k_bins = 0;
  std::vector<double> bin_low, bin_high;
  std::vector<int> count;
  std::vector<double> conf, acc;  // zero for empty bins
};

CalibrationBins reliability_bins(const std::vector<double>& confidences,
                                 const std::vector<int>& correctness,
                                 int k_bins = 15);

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int n_classes);

// Rank-based (Mann-Whitney) AUC with midranks for ties.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Dataset files: one-line schema headers, delimited text, UTF-8.
void write_dataset(const std::string& dir, const TemporalHypergraph& graph,
                   const std::vector<std::pair<int, int>>& truth_edges = {});
TemporalHypergraph read_dataset(const std::string& dir);
std::vector<std::pair<int, int>> read_truth_edges(const std::string& dir);
bool has_truth_edges(const std::string& dir);

}  // namespace sphunc
