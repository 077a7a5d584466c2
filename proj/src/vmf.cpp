#include "sphunc/vmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sphunc/rng.hpp"

namespace sphunc::vmf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kPi = 3.14159265358979323846;

void check_domain(int dim, double kappa) {
  if (dim < 2) throw std::domain_error("vmf: dim must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw std::domain_error("vmf: kappa must be finite and non-negative");
}

double order_of(int dim) { return 0.5 * dim - 1.0; }

// Power series I_nu(x) = (x/2)^nu / Gamma(nu+1) * sum_k (x^2/4)^k / (k! (nu+1)_k),
// with the prefactor kept in log space. Safe for x <= max(32, nu): the
// residual sum stays far below double range there.
double log_series_sum(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 4000; ++k) {
    term *= q / (k * (nu + k));
    sum += term;
    if (term < sum * 1e-17 && q < k * (nu + k)) break;
  }
  return std::log(sum);
}

double log_bessel_series(double nu, double x) {
  return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + log_series_sum(nu, x);
}

// Hankel large-argument expansion, used only for the nu0 = 0 anchor where
// x >= 32 makes it accurate to ~1e-15.
double log_bessel_hankel(double nu, double x) {
  const double mu4 = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0, prev = std::numeric_limits<double>::max();
  for (int k = 1; k <= 40; ++k) {
    const double f = 2.0 * k - 1.0;
    term *= -(mu4 - f * f) / (8.0 * x * k);
    if (std::abs(term) >= prev) break;  // asymptotic tail started to diverge
    sum += term;
    prev = std::abs(term);
    if (std::abs(term) < 1e-18 * sum) break;
  }
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log(sum);
}

// Exact elementary form of log I_{1/2}(x) = log(sqrt(2/(pi x)) sinh x).
double log_bessel_half(double x) {
  return x - std::log(2.0) + std::log1p(-std::exp(-2.0 * x)) +
         0.5 * (std::log(2.0 / (kPi * x)));
}

// I_{nu+1}(x)/I_nu(x) via the Gauss continued fraction (modified Lentz).
double ratio_continued_fraction(double nu, double x) {
  const double tiny = 1e-300;
  double f = tiny, c = f, d = 0.0;
  for (int m = 1; m < 4000000; ++m) {
    const double b = 2.0 * (nu + m) / x;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 5e-17) break;
  }
  return f;
}

double ratio_impl(double nu, double x) {
  if (x <= 0.0) return 0.0;
  if (x < 1e-100) return x / (2.0 * (nu + 1.0));
  if (x >= 1e4 * std::max(1.0, nu)) {
    // Large-argument expansion of the ratio; third-order term keeps the
    // relative error near 1e-12 at the switch point.
    const double inv = 1.0 / x;
    return 1.0 - 0.5 * (2.0 * nu + 1.0) * inv +
           0.125 * (4.0 * nu * nu - 1.0) * inv * inv;
  }
  return ratio_continued_fraction(nu, x);
}

// Anchored chain: log I_nu = log I_{nu0} + sum log(I_{j+1}/I_j) with
// nu0 = frac(nu) in {0, 0.5} and downward-stable ratio recurrence.
double log_bessel_chain(double nu, double x) {
  const double nu0 = nu - std::floor(nu);
  const int m = static_cast<int>(std::llround(nu - nu0));
  double log_anchor = (nu0 > 0.25) ? log_bessel_half(x) : log_bessel_hankel(0.0, x);
  if (m == 0) return log_anchor;
  // ratios r_j = I_{j+1}/I_j for j = nu0 .. nu-1, top one from the CF,
  // the rest by r_{j-1} = 1 / (2 j / x + r_j).
  std::vector<double> ratios(m);
  ratios[m - 1] = ratio_impl(nu - 1.0, x);
  for (int k = m - 1; k >= 1; --k) {
    const double j = nu0 + k;
    ratios[k - 1] = 1.0 / (2.0 * j / x + ratios[k]);
  }
  double acc = log_anchor;
  for (int k = 0; k < m; ++k) acc += std::log(ratios[k]);
  return acc;
}

}  // namespace

VmfBelief::VmfBelief(Eigen::VectorXd mean_direction, double concentration)
    : mu(std::move(mean_direction)), kappa(concentration) {
  if (mu.size() < 2) throw std::domain_error("VmfBelief: dim must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw std::domain_error("VmfBelief: kappa must be finite and non-negative");
  if (std::abs(mu.norm() - 1.0) > 1e-9)
    throw std::domain_error("VmfBelief: mu must be unit length");
}

double log_sphere_volume(int dim) {
  if (dim < 2) throw std::domain_error("log_sphere_volume: dim must be >= 2");
  return std::log(2.0) + 0.5 * dim * std::log(kPi) - std::lgamma(0.5 * dim);
}

double log_bessel_i(double nu, double x) {
  if (x < 0.0 || nu < 0.0) throw std::domain_error("log_bessel_i: bad argument");
  if (x == 0.0)
    return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x <= std::max(32.0, nu)) return log_bessel_series(nu, x);
  return log_bessel_chain(nu, x);
}

double bessel_ratio(double nu, double x) { return ratio_impl(nu, x); }

double log_normalizer(int dim, double kappa) {
  check_domain(dim, kappa);
  const double nu = order_of(dim);
  if (kappa == 0.0) return -log_sphere_volume(dim);
  if (kappa <= std::max(32.0, nu)) {
    // The nu log(kappa) prefactors cancel symbolically against the series,
    // which keeps tiny kappa exact.
    return nu * std::log(2.0) + std::lgamma(nu + 1.0) -
           0.5 * dim * kLog2Pi - log_series_sum(nu, kappa);
  }
  return nu * std::log(kappa) - 0.5 * dim * kLog2Pi -
         log_bessel_chain(nu, kappa);
}

double mean_resultant(int dim, double kappa) {
  check_domain(dim, kappa);
  if (kappa == 0.0) return 0.0;
  return ratio_impl(order_of(dim), kappa);
}

double entropy(int dim, double kappa) {
  check_domain(dim, kappa);
  if (kappa == 0.0) return log_sphere_volume(dim);
  return -log_normalizer(dim, kappa) - kappa * mean_resultant(dim, kappa);
}

double psi_second(int dim, double kappa) {
  check_domain(dim, kappa);
  if (kappa <= 0.0) throw std::domain_error("psi_second: kappa must be > 0");
  const double a = 0.5 * (dim - 1.0);
  if (kappa >= 1e4 * std::max(1.0, order_of(dim))) {
    // 1 - A^2 - (D-1)A/kappa cancels to O(1/kappa^2); use the expansion.
    return a / (kappa * kappa) + a * (1.0 - a) / (kappa * kappa * kappa);
  }
  const double A = mean_resultant(dim, kappa);
  return 1.0 - A * A - (dim - 1.0) * A / kappa;
}

double entropy_derivative(int dim, double kappa) {
  if (!(kappa > 0.0)) throw std::domain_error("entropy_derivative: kappa must be > 0");
  return -kappa * psi_second(dim, kappa);
}

std::vector<Eigen::VectorXd> sample(const VmfBelief& belief, int n,
                                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("vmf::sample: n must be >= 1");
  const int dim = belief.dim();
  const double kappa = belief.kappa;
  auto eng = rng::make_engine(rng::derive(seed, 0x76d6f5a1ULL));

  std::vector<Eigen::VectorXd> out;
  out.reserve(n);

  if (kappa == 0.0) {
    for (int i = 0; i < n; ++i) out.push_back(rng::uniform_sphere(dim, eng));
    return out;
  }

  // Wood's rejection sampler for the tangential coordinate w = mu.h.
  const double dm1 = dim - 1.0;
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double w = 0.0;
    for (;;) {
      const double z = rng::beta_sample(0.5 * dm1, 0.5 * dm1, eng);
      const double u = unif(eng);
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
    }
    // Uniform direction in the tangent space of mu.
    Eigen::VectorXd v;
    double vn = 0.0;
    do {
      Eigen::VectorXd g = rng::gaussian_vector(dim, eng);
      v = g - g.dot(belief.mu) * belief.mu;
      vn = v.norm();
    } while (vn < 1e-12);
    v /= vn;
    Eigen::VectorXd h = w * belief.mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
    h.normalize();
    out.push_back(std::move(h));
  }
  return out;
}

double solve_concentration(int dim, double rbar) {
  if (dim < 2) throw std::domain_error("solve_concentration: dim must be >= 2");
  if (rbar <= 0.0) return 0.0;
  if (rbar >= 1.0 - 1e-12)
    throw SaturationError("solve_concentration: mean resultant saturated (rbar ~ 1)");

  double kappa = rbar * (dim - rbar * rbar) / (1.0 - rbar * rbar);
  kappa = std::max(kappa, 1e-12);

  double lo = 0.0, hi = -1.0;  // hi < 0 means "not yet bracketed above"
  for (int it = 0; it < 100; ++it) {
    const double g = mean_resultant(dim, kappa) - rbar;
    if (std::abs(g) <= 1e-10) return kappa;
    if (g < 0.0)
      lo = kappa;
    else
      hi = kappa;
    const double slope = psi_second(dim, kappa);
    double next = kappa - g / slope;
    const bool inside = hi > 0.0 ? (next > lo && next < hi) : (next > lo);
    if (!std::isfinite(next) || !inside || slope <= 0.0) {
      next = hi > 0.0 ? 0.5 * (lo + hi) : 2.0 * std::max(kappa, 1.0);
    }
    kappa = next;
  }
  // Newton budget exhausted; close the bracket by pure bisection.
  if (hi < 0.0) hi = std::max(2.0 * kappa, 1.0);
  while (mean_resultant(dim, hi) < rbar) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = mean_resultant(dim, mid) - rbar;
    if (std::abs(g) <= 1e-10) return mid;
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double fit_kappa(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("fit_kappa: need at least 2 samples");
  const int dim = static_cast<int>(samples.front().size());
  for (const auto& s : samples)
    if (s.size() != dim)
      throw std::invalid_argument("fit_kappa: mixed sample dimensions");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  return solve_concentration(dim, mean.norm());
}

}  // namespace sphunc::vmf
