// Benchmark driver: interventional-simulation scaling in S and T_sim, and
// the vMF stability sweep. Results land as "setting,time_ms" delimited text.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sphunc/bench.hpp"
#include "sphunc/data.hpp"

using namespace sphunc;

int main(int argc, char** argv) {
  CLI::App app{"sphunc benchmarks"};
  std::string out_dir = "bench_out";
  long long seed = 1;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);

  SyntheticSpec spec;
  spec.n_nodes = 20;
  spec.timesteps = 8;
  spec.feat_dim = 12;
  spec.latent_dim = 12;
  spec.seed = static_cast<std::uint64_t>(seed);
  auto data = gen_synthetic(spec);
  ScmModel model = data.truth;
  const Eigen::MatrixXd init = data.latents.front();

  const std::vector<int> s_grid = {100, 200, 400, 800, 1600};
  const std::vector<int> t_grid = {10, 20, 40, 80, 160};
  auto [by_s, by_t] =
      bench_intervention_scaling(model, init, s_grid, 20, t_grid, 100, 7);

  {
    std::ofstream out(std::filesystem::path(out_dir) / "scaling.csv");
    out << "setting,time_ms\n";
    for (const auto& [x, sec] : by_s.points)
      out << "S_" << static_cast<int>(x) << ',' << sec * 1e3 << '\n';
    for (const auto& [x, sec] : by_t.points)
      out << "T_" << static_cast<int>(x) << ',' << sec * 1e3 << '\n';
  }
  std::cout << "samples grid: slope=" << by_s.fit.slope
            << " r2=" << by_s.fit.r_squared << "\n";
  std::cout << "horizon grid: slope=" << by_t.fit.slope
            << " r2=" << by_t.fit.r_squared << "\n";

  std::vector<double> kappas;
  for (double k = 1e-4; k <= 1.01e6; k *= 10.0) kappas.push_back(k);
  auto stability = bench_vmf_stability({2, 3, 8, 128, 512}, kappas);
  {
    std::ofstream out(std::filesystem::path(out_dir) / "stability.csv");
    out << "dim,kappa,entropy,log_normalizer,mean_resultant\n";
    for (const auto& row : stability.table)
      out << row.dim << ',' << row.kappa << ',' << row.entropy << ','
          << row.log_normalizer << ',' << row.mean_resultant << '\n';
  }
  std::cout << "stability: finite=" << (stability.all_finite ? "yes" : "no")
            << " monotone=" << (stability.monotone ? "yes" : "no") << "\n";
  for (const auto& f : stability.failures) std::cerr << "  " << f << "\n";
  return stability.all_finite && stability.monotone ? 0 : 1;
}
