#include "sphunc/bench.hpp"

#include <chrono>
#include <cmath>

#include "sphunc/vmf.hpp"

namespace sphunc {

namespace {

double time_intervene(const ScmModel& model, const Eigen::MatrixXd& init,
                      int samples, int horizon, std::uint64_t seed) {
  InterventionSpec spec;
  spec.horizon = horizon;
  spec.n_samples = samples;
  const auto start = std::chrono::steady_clock::now();
  volatile double sink = intervene(model, spec, init, {}, seed).sum();
  (void)sink;
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

std::pair<BenchResult, BenchResult> bench_intervention_scaling(
    const ScmModel& model, const Eigen::MatrixXd& init,
    const std::vector<int>& s_grid, int fixed_horizon,
    const std::vector<int>& t_grid, int fixed_samples, std::uint64_t seed) {
  // Warm-up pass so allocation and code paths are hot before timing.
  time_intervene(model, init, s_grid.front(), fixed_horizon, seed);

  BenchResult by_s;
  by_s.setting = "samples";
  for (int s : s_grid)
    by_s.points.emplace_back(double(s),
                             time_intervene(model, init, s, fixed_horizon, seed));
  by_s.fit = stats::fit_line(by_s.points);

  BenchResult by_t;
  by_t.setting = "horizon";
  for (int t : t_grid)
    by_t.points.emplace_back(double(t),
                             time_intervene(model, init, fixed_samples, t, seed));
  by_t.fit = stats::fit_line(by_t.points);
  return {by_s, by_t};
}

StabilityResult bench_vmf_stability(const std::vector<int>& dims,
                                    const std::vector<double>& kappas) {
  StabilityResult result;
  for (int dim : dims) {
    double prev_entropy = std::numeric_limits<double>::infinity();
    for (double kappa : kappas) {
      StabilityRow row;
      row.dim = dim;
      row.kappa = kappa;
      row.entropy = vmf::entropy(dim, kappa);
      row.log_normalizer = vmf::log_normalizer(dim, kappa);
      row.mean_resultant = vmf::mean_resultant(dim, kappa);
      const bool finite = std::isfinite(row.entropy) &&
                          std::isfinite(row.log_normalizer) &&
                          std::isfinite(row.mean_resultant);
      if (!finite) {
        result.all_finite = false;
        result.failures.push_back("non-finite at dim=" + std::to_string(dim) +
                                  " kappa=" + std::to_string(kappa));
      }
      if (row.entropy >= prev_entropy) {
        result.monotone = false;
        result.failures.push_back("entropy not decreasing at dim=" +
                                  std::to_string(dim) +
                                  " kappa=" + std::to_string(kappa));
      }
      prev_entropy = row.entropy;
      result.table.push_back(row);
    }
  }
  return result;
}

}  // namespace sphunc
