#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "sphunc/structure.hpp"

// Structural causal model over spherical latents: forward simulation,
// do-interventions, Monte Carlo interventional entropy and identification
// confidence.
namespace sphunc {

// noise_kappa at or above this value means the deterministic limit: the
// structural direction is returned without a vMF draw.
inline constexpr double kDeterministicKappa = 1e6;

// Stream tag for per-step seeds inside simulate (step t uses
// rng::derive(seed, kSimStepStream, t)).
inline constexpr std::uint64_t kSimStepStream = 0x51e9;

// Directed lag-1 influence dst <- src with a D x D weight block
// (gamma_ij * W_c in the factored form, or a freely fitted matrix).
struct ScmEdge {
  int src = 0;
  int dst = 0;
  Eigen::MatrixXd weight;
};

struct ScmModel {
  int dim = 0;
  int n_nodes = 0;
  std::vector<ScmEdge> edges;                // temporal ordering: lag >= 1 only
  std::vector<Eigen::VectorXd> exo_dir;      // persistent prior bias, unit
  Eigen::VectorXd exo_strength;              // per node, >= 0
  double noise_kappa = 50.0;
  Eigen::MatrixXd feat_proj;                 // D x d; 0x0 disables features
  Eigen::VectorXd feat_bias;
  std::vector<int> readout_nodes;
  std::vector<Eigen::VectorXd> readout_w;    // aligned with readout_nodes
  double readout_bias = 0.0;

  std::vector<std::vector<int>> parent_sets() const;
  double readout(const Eigen::MatrixXd& states) const;  // Y = sum w.h + bias
};

struct InterventionSpec {
  std::map<int, Eigen::VectorXd> targets;  // node -> pinned unit state h*
  int start_t = 1;
  int horizon = 10;     // T_sim
  int n_samples = 100;  // S
  bool pulse = false;   // sustained pinning by default
};

// Deterministic part of the transition: normalized structural drift
// (parents + features + exogenous bias) for every node.
Eigen::MatrixXd structural_direction(const ScmModel& model,
                                     const Eigen::MatrixXd& prev,
                                     const Eigen::MatrixXd& features);

// One SCM transition. States are D x N column blocks; features d x N or
// empty. Deterministic given the seed.
Eigen::MatrixXd forward_step(const ScmModel& model, const Eigen::MatrixXd& prev,
                             const Eigen::MatrixXd& features, std::uint64_t seed);

// Applies forward_step horizon times; returns the trajectory including the
// initial state at index 0. features may be empty or hold one d x N block
// per step.
std::vector<Eigen::MatrixXd> simulate(const ScmModel& model,
                                      const Eigen::MatrixXd& init,
                                      const std::vector<Eigen::MatrixXd>& features,
                                      int horizon, std::uint64_t seed);

// S exogenous-noise replicates of the readout under do(h*): targeted nodes
// are pinned from start_t through the horizon (single step in pulse mode).
Eigen::VectorXd intervene(const ScmModel& model, const InterventionSpec& spec,
                          const Eigen::MatrixXd& init,
                          const std::vector<Eigen::MatrixXd>& features,
                          std::uint64_t seed);

enum class EntropyEstimator { kGaussianPlugin, kHistogram };

struct CausalEntropyResult {
  double value = 0.0;
  bool degenerate = false;  // variance floor engaged
};

// Shannon entropy of the interventional predictive distribution from S
// samples of Y. Gaussian plug-in 0.5 log(2 pi e max(var, floor)) by default;
// Freedman-Diaconis histogram estimator by configuration.
CausalEntropyResult causal_entropy(
    const std::vector<double>& samples,
    EntropyEstimator estimator = EntropyEstimator::kGaussianPlugin,
    double var_floor = 1e-12);

struct StructurePosterior {
  struct Candidate {
    std::vector<int> parents;
    double weight = 0.0;
  };
  struct NodePosterior {
    std::vector<Candidate> candidates;  // weights sum to 1
    double map_confidence = 0.0;
  };
  std::vector<NodePosterior> nodes;
  double overall_confidence = 0.0;  // geometric mean of per-node MAP mass
};

// BIC-weighted posterior over parent sets of size <= sparsity_s drawn from
// each node's top_m scored candidate edges (lag-1 regressions on the series).
StructurePosterior identification_confidence(
    const LatentSeries& series, const std::vector<EdgeScore>& candidates,
    int sparsity_s, int top_m = 4);

// Least-squares refit of edge weights, exogenous bias and noise
// concentration for a fixed parent structure. Readout is left for the caller.
ScmModel fit_scm(const LatentSeries& series,
                 const std::vector<std::vector<int>>& parents);

}  // namespace sphunc
