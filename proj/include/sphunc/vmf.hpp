#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

// von Mises-Fisher primitives on S^{D-1}. All radial quantities are computed
// through log-scaled modified Bessel routines so that concentrations up to
// 1e6 and dimensions up to 512 stay finite.
namespace sphunc::vmf {

// Raised by fit_kappa when the empirical mean resultant saturates at 1.
struct SaturationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Directional belief: unit mean direction plus concentration.
struct VmfBelief {
  Eigen::VectorXd mu;
  double kappa = 0.0;

  VmfBelief(Eigen::VectorXd mean_direction, double concentration);
  int dim() const { return static_cast<int>(mu.size()); }
};

// log of the surface area of S^{dim-1}: log(2 pi^{D/2} / Gamma(D/2)).
double log_sphere_volume(int dim);

// log I_nu(x), valid for nu = D/2 - 1 with D >= 2 (i.e. nu in {0, 0.5, 1, ...})
// and x in [0, ~1e6]. Exposed for tests.
double log_bessel_i(double nu, double x);

// Bessel ratio I_{nu+1}(x) / I_nu(x) in [0, 1).
double bessel_ratio(double nu, double x);

// log C_D(kappa) of the density C_D(kappa) exp(kappa mu.h).
double log_normalizer(int dim, double kappa);

// Mean resultant length A_D(kappa) = I_{D/2}(kappa) / I_{D/2-1}(kappa).
double mean_resultant(int dim, double kappa);

// Hyperspherical Shannon entropy: -log C_D(kappa) - kappa A_D(kappa).
double entropy(int dim, double kappa);

// Second derivative of the log-partition: Var(mu.h) = 1 - A^2 - (D-1)A/kappa.
// No convexity claim is attached to it.
double psi_second(int dim, double kappa);

// dH/dkappa = -kappa * psi_second(kappa); strictly negative for kappa > 0.
double entropy_derivative(int dim, double kappa);

// n i.i.d. draws from vMF(mu, kappa); deterministic given the seed.
std::vector<Eigen::VectorXd> sample(const VmfBelief& belief, int n,
                                    std::uint64_t seed);

// Solve A_D(kappa) = rbar for kappa (Banerjee-style initializer + Newton with
// bisection fallback). rbar <= 0 returns 0; rbar >= 1 - 1e-12 throws
// SaturationError.
double solve_concentration(int dim, double rbar);

// Concentration MLE from unit-vector samples via the mean resultant length.
double fit_kappa(const std::vector<Eigen::VectorXd>& samples);

}  // namespace sphunc::vmf
