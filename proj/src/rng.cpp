#include "sphunc/rng.hpp"

namespace sphunc::rng {

Eigen::VectorXd uniform_sphere(int dim, Engine& eng) {
  Eigen::VectorXd v(dim);
  double norm2 = 0.0;
  do {
    v = gaussian_vector(dim, eng);
    norm2 = v.squaredNorm();
  } while (norm2 < 1e-24);
  return v / std::sqrt(norm2);
}

}  // namespace sphunc::rng
