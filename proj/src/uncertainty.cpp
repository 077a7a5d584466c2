#include "sphunc/uncertainty.hpp"

#include <cmath>
#include <stdexcept>

#include "sphunc/rng.hpp"
#include "sphunc/sphere.hpp"
#include "sphunc/vmf.hpp"

namespace sphunc {

AleatoricParams AleatoricParams::zeros(int in_dim, int hidden) {
  AleatoricParams p;
  p.W1 = Eigen::MatrixXd::Zero(hidden, in_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::VectorXd::Zero(hidden);
  p.b2 = 0.0;
  return p;
}

AleatoricParams AleatoricParams::random_init(int in_dim, int hidden,
                                             std::uint64_t seed) {
  auto eng = rng::make_engine(rng::derive(seed, 0xa1eaULL));
  AleatoricParams p;
  p.W1 = rng::gaussian_matrix(hidden, in_dim, eng, 1.0 / std::sqrt(double(in_dim)));
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = rng::gaussian_matrix(hidden, 1, eng, 1.0 / std::sqrt(double(hidden))).col(0);
  p.b2 = 0.0;
  return p;
}

double aleatoric(const AleatoricParams& params, const Eigen::VectorXd& x) {
  const double z =
      params.w2.dot((params.W1 * x + params.b1).array().tanh().matrix()) + params.b2;
  return softplus(z);
}

double fit_aleatoric(AleatoricParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& targets, int epochs, double lr,
                     std::uint64_t seed) {
  if (X.cols() != targets.size())
    throw std::invalid_argument("fit_aleatoric: X columns must match targets");
  const int n = static_cast<int>(X.cols());
  const int hidden = static_cast<int>(params.w2.size());
  const int in_dim = static_cast<int>(params.W1.cols());

  // Flat Adam over (W1, b1, w2, b2).
  const int n_par = hidden * in_dim + hidden + hidden + 1;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_par), v = Eigen::VectorXd::Zero(n_par);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  (void)seed;

  double loss = 0.0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    Eigen::MatrixXd gW1 = Eigen::MatrixXd::Zero(hidden, in_dim);
    Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd gw2 = Eigen::VectorXd::Zero(hidden);
    double gb2 = 0.0;
    loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = X.col(i);
      const Eigen::VectorXd a = (params.W1 * x + params.b1).array().tanh();
      const double z = params.w2.dot(a) + params.b2;
      const double pred = softplus(z);
      const double r = pred - targets[i];
      loss += r * r;
      const double dz = 2.0 * r * sigmoid(z) / n;
      gw2 += dz * a;
      gb2 += dz;
      const Eigen::VectorXd da =
          (params.w2.array() * (1.0 - a.array().square())).matrix() * dz;
      gW1 += da * x.transpose();
      gb1 += da;
    }
    loss /= n;

    Eigen::VectorXd g(n_par);
    int off = 0;
    for (int j = 0; j < in_dim; ++j)
      for (int i = 0; i < hidden; ++i) g[off++] = gW1(i, j);
    for (int i = 0; i < hidden; ++i) g[off++] = gb1[i];
    for (int i = 0; i < hidden; ++i) g[off++] = gw2[i];
    g[off++] = gb2;

    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v.array().matrix() + (1.0 - beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(beta1, epoch);
    const double bc2 = 1.0 - std::pow(beta2, epoch);
    Eigen::VectorXd step =
        (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());

    off = 0;
    for (int j = 0; j < in_dim; ++j)
      for (int i = 0; i < hidden; ++i) params.W1(i, j) -= lr * step[off++];
    for (int i = 0; i < hidden; ++i) params.b1[i] -= lr * step[off++];
    for (int i = 0; i < hidden; ++i) params.w2[i] -= lr * step[off++];
    params.b2 -= lr * step[off++];
  }
  return loss;
}

FusionParams FusionParams::pass_through(int hidden) {
  FusionParams p;
  p.A1_raw = Eigen::MatrixXd::Zero(hidden, 2);
  p.c1 = Eigen::VectorXd::Zero(hidden);
  p.A2_raw = Eigen::MatrixXd::Zero(hidden, hidden);
  p.c2 = Eigen::VectorXd::Zero(hidden);
  p.a3_raw = Eigen::VectorXd::Zero(hidden);
  p.c3 = 0.0;
  p.skip_raw << 1.0, 1.0;
  return p;
}

FusionParams FusionParams::random_init(int hidden, std::uint64_t seed) {
  auto eng = rng::make_engine(rng::derive(seed, 0xf5e0ULL));
  FusionParams p;
  p.A1_raw = rng::gaussian_matrix(hidden, 2, eng, 0.3);
  p.c1 = rng::gaussian_matrix(hidden, 1, eng, 0.1).col(0);
  p.A2_raw = rng::gaussian_matrix(hidden, hidden, eng, 0.3);
  p.c2 = rng::gaussian_matrix(hidden, 1, eng, 0.1).col(0);
  p.a3_raw = rng::gaussian_matrix(hidden, 1, eng, 0.3).col(0);
  p.c3 = 0.0;
  p.skip_raw << 1.0, 1.0;
  return p;
}

double fuse(const FusionParams& params, double u_epi, double u_alea) {
  Eigen::Vector2d in(u_epi, u_alea);
  const Eigen::VectorXd z1 =
      (params.A1_raw.array().square().matrix() * in + params.c1).array().tanh();
  const Eigen::VectorXd z2 =
      (params.A2_raw.array().square().matrix() * z1 + params.c2).array().tanh();
  const double deep = params.a3_raw.array().square().matrix().dot(z2) + params.c3;
  return deep + params.skip_raw[0] * params.skip_raw[0] * u_epi +
         params.skip_raw[1] * params.skip_raw[1] * u_alea;
}

double epistemic(int dim, double kappa) { return vmf::entropy(dim, kappa); }

double calibration_loss(const std::vector<double>& u_total,
                        const std::vector<double>& u_emp) {
  if (u_total.size() != u_emp.size() || u_total.empty())
    throw std::invalid_argument("calibration_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u_total.size(); ++i) {
    const double d = u_total[i] - u_emp[i];
    s += d * d;
  }
  return s / static_cast<double>(u_total.size());
}

double empirical_proxy(const std::vector<double>& residuals) {
  if (residuals.empty())
    throw std::invalid_argument("empirical_proxy: empty window");
  double s = 0.0;
  for (double r : residuals) s += r * r;
  return s / static_cast<double>(residuals.size());
}

}  // namespace sphunc
