#pragma once

#include <string>
#include <vector>

#include "sphunc/scm.hpp"
#include "sphunc/stats.hpp"

// Desk-scale complexity and stability benchmarks: wall-time linearity of
// interventional simulation in S and T_sim, and a vMF sweep across extreme
// concentration regimes.
namespace sphunc {

struct BenchResult {
  std::string setting;
  stats::LinearFit fit;
  std::vector<std::pair<double, double>> points;  // (grid value, seconds)
};

// Times intervene() along an S grid (T fixed) and a T grid (S fixed).
std::pair<BenchResult, BenchResult> bench_intervention_scaling(
    const ScmModel& model, const Eigen::MatrixXd& init,
    const std::vector<int>& s_grid, int fixed_horizon,
    const std::vector<int>& t_grid, int fixed_samples, std::uint64_t seed);

struct StabilityRow {
  int dim = 0;
  double kappa = 0.0;
  double entropy = 0.0;
  double log_normalizer = 0.0;
  double mean_resultant = 0.0;
};

struct StabilityResult {
  bool all_finite = true;
  bool monotone = true;
  std::vector<StabilityRow> table;
  std::vector<std::string> failures;
};

StabilityResult bench_vmf_stability(const std::vector<int>& dims,
                                    const std::vector<double>& kappas);

}  // namespace sphunc
