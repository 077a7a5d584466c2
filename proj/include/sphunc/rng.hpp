#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace sphunc::rng {

using Engine = std::mt19937_64;

// splitmix64 finalizer; combines a base seed with stream indices so that
// independent sub-streams (per sample, per node, per timestep) never collide.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t base, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

inline Engine make_engine(std::uint64_t seed) { return Engine(mix(seed)); }

inline double uniform(Engine& eng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

inline double normal(Engine& eng) {
  return std::normal_distribution<double>(0.0, 1.0)(eng);
}

inline Eigen::VectorXd gaussian_vector(int n, Engine& eng) {
  Eigen::VectorXd v(n);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < n; ++i) v[i] = g(eng);
  return v;
}

inline Eigen::MatrixXd gaussian_matrix(int rows, int cols, Engine& eng,
                                       double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = scale * g(eng);
  return m;
}

// Uniform direction on S^{dim-1}.
Eigen::VectorXd uniform_sphere(int dim, Engine& eng);

inline double gamma_sample(double shape, Engine& eng) {
  return std::gamma_distribution<double>(shape, 1.0)(eng);
}

inline double beta_sample(double a, double b, Engine& eng) {
  const double x = gamma_sample(a, eng);
  const double y = gamma_sample(b, eng);
  return x / (x + y);
}

}  // namespace sphunc::rng
