#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

// Spherical latent encoding: projection + normalization, concentration head,
// angular attention, causal gating and hypergraph message passing.
namespace sphunc {

struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Latent directional state of one agent at one time.
struct SphericalState {
  Eigen::VectorXd h;
  int node_id = 0;
  int t = 0;
};

// gamma_{src -> dst} in [0, 1]; pairs absent from the table default to 1.
class GateTable {
 public:
  void set(int src, int dst, double gamma);
  double get(int src, int dst) const;
  bool has(int src, int dst) const;
  std::size_t size() const { return gamma_.size(); }
  const std::unordered_map<std::uint64_t, double>& raw() const { return gamma_; }

  static std::uint64_t key(int src, int dst) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) |
           static_cast<std::uint32_t>(dst);
  }

 private:
  std::unordered_map<std::uint64_t, double> gamma_;
};

// rho_psi: one hidden tanh layer, scalar pre-activation z, output clamped to
// [kappa_min, kappa_max] via kappa = min + (max - min) * sigmoid(z).
struct KappaHead {
  Eigen::MatrixXd W1;  // hidden x D
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
  double kappa_min = 1.0;
  double kappa_max = 200.0;

  double preactivation(const Eigen::VectorXd& h) const;
  double operator()(const Eigen::VectorXd& h) const;
};

struct EncoderParams {
  Eigen::MatrixXd W;   // D x d projection
  Eigen::VectorXd b;   // D
  KappaHead kappa_head;
  double kappa_a = 1.0;  // attention temperature, > 0
  Eigen::MatrixXd W_c;   // D x D causal projection
  GateTable gates;
};

using Hyperedge = std::vector<int>;                    // node ids, |e| >= 2
using ParentMap = std::unordered_map<int, std::vector<int>>;  // dst -> parents

double sigmoid(double x);
double softplus(double x);

// (W x + b) / ||W x + b||; throws DegenerateError when the pre-normalization
// norm falls below eps_norm.
SphericalState project_normalize(const EncoderParams& params,
                                 const Eigen::VectorXd& x, int node_id = 0,
                                 int t = 0, double eps_norm = 1e-12);

double concentration(const EncoderParams& params, const SphericalState& h);

// Softmax over kappa_a * <h_i, h_j> with max subtraction; entries positive,
// sum to 1.
Eigen::VectorXd angular_attention(const SphericalState& h_i,
                                  const std::vector<SphericalState>& neighbors,
                                  double kappa_a);

// One layer of spherical hypergraph message passing with causal injection:
// residual + mean over incident hyperedges of attention-weighted sums +
// gated causal messages, renormalized to the sphere.
std::vector<SphericalState> message_passing_step(
    const EncoderParams& params, const std::vector<SphericalState>& states,
    const std::vector<Hyperedge>& hyperedges, const ParentMap& parents);

// Max over pairs of |cos(Wu, Wv) - cos(u, v)|; the JL property statistic.
double angle_distortion(const std::vector<Eigen::VectorXd>& points,
                        const Eigen::MatrixXd& W);

}  // namespace sphunc
