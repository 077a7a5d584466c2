#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

// Epistemic/aleatoric uncertainty heads, the monotone fusion map and the
// entropy-calibration loss.
namespace sphunc {

struct UncertaintyReport {
  double u_epi = 0.0;    // nats, hyperspherical entropy
  double u_alea = 0.0;   // target-variance units, >= 0
  double u_total = 0.0;  // fused scalar
  std::optional<double> u_emp;  // empirical proxy when available
};

// sigma^2_phi: one hidden tanh layer with softplus output (> 0).
struct AleatoricParams {
  Eigen::MatrixXd W1;  // hidden x in_dim
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;

  static AleatoricParams zeros(int in_dim, int hidden = 64);
  static AleatoricParams random_init(int in_dim, int hidden, std::uint64_t seed);
};

double aleatoric(const AleatoricParams& params, const Eigen::VectorXd& x);

// Gradient-descent fit of the aleatoric head against observed squared
// residuals (MSE objective, Adam). Returns the final training loss.
double fit_aleatoric(AleatoricParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& targets, int epochs, double lr,
                     std::uint64_t seed);

// Monotone fusion g_omega(u_epi, u_alea): two hidden tanh layers plus skip
// connections. Every weight enters as raw^2, so the map is coordinatewise
// non-decreasing for any parameter value.
struct FusionParams {
  Eigen::MatrixXd A1_raw;  // hidden x 2
  Eigen::VectorXd c1;
  Eigen::MatrixXd A2_raw;  // hidden x hidden
  Eigen::VectorXd c2;
  Eigen::VectorXd a3_raw;  // hidden
  double c3 = 0.0;
  Eigen::Vector2d skip_raw = Eigen::Vector2d::Zero();

  // Exact identity configuration: fuse(a, b) = a + b.
  static FusionParams pass_through(int hidden = 8);
  static FusionParams random_init(int hidden, std::uint64_t seed);
};

double fuse(const FusionParams& params, double u_epi, double u_alea);

// U_epi = H_sph(kappa) for the configured sphere dimension.
double epistemic(int dim, double kappa);

// Mean of (U_total - U_emp)^2.
double calibration_loss(const std::vector<double>& u_total,
                        const std::vector<double>& u_emp);

// Mean squared residual over one held-out window.
double empirical_proxy(const std::vector<double>& residuals);

}  // namespace sphunc
