#include "sphunc/sphere.hpp"

#include <algorithm>
#include <cmath>

namespace sphunc {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

void GateTable::set(int src, int dst, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("GateTable: gamma must lie in [0, 1]");
  gamma_[key(src, dst)] = gamma;
}

double GateTable::get(int src, int dst) const {
  auto it = gamma_.find(key(src, dst));
  return it == gamma_.end() ? 1.0 : it->second;
}

bool GateTable::has(int src, int dst) const {
  return gamma_.find(key(src, dst)) != gamma_.end();
}

double KappaHead::preactivation(const Eigen::VectorXd& h) const {
  return w2.dot((W1 * h + b1).array().tanh().matrix()) + b2;
}

double KappaHead::operator()(const Eigen::VectorXd& h) const {
  return kappa_min + (kappa_max - kappa_min) * sigmoid(preactivation(h));
}

SphericalState project_normalize(const EncoderParams& params,
                                 const Eigen::VectorXd& x, int node_id, int t,
                                 double eps_norm) {
  Eigen::VectorXd u = params.W * x + params.b;
  const double n = u.norm();
  if (n <= eps_norm)
    throw DegenerateError("project_normalize: pre-normalization vector ~ 0");
  return SphericalState{u / n, node_id, t};
}

double concentration(const EncoderParams& params, const SphericalState& h) {
  return params.kappa_head(h.h);
}

Eigen::VectorXd angular_attention(const SphericalState& h_i,
                                  const std::vector<SphericalState>& neighbors,
                                  double kappa_a) {
  if (neighbors.empty())
    throw std::invalid_argument("angular_attention: neighbors must be non-empty");
  if (!(kappa_a > 0.0))
    throw std::invalid_argument("angular_attention: kappa_a must be > 0");
  const int m = static_cast<int>(neighbors.size());
  Eigen::VectorXd scores(m);
  for (int j = 0; j < m; ++j) scores[j] = kappa_a * h_i.h.dot(neighbors[j].h);
  const double top = scores.maxCoeff();
  Eigen::VectorXd w = (scores.array() - top).exp();
  return w / w.sum();
}

std::vector<SphericalState> message_passing_step(
    const EncoderParams& params, const std::vector<SphericalState>& states,
    const std::vector<Hyperedge>& hyperedges, const ParentMap& parents) {
  std::unordered_map<int, int> index;
  index.reserve(states.size());
  for (int i = 0; i < static_cast<int>(states.size()); ++i)
    index.emplace(states[i].node_id, i);

  auto at = [&](int node_id) -> const SphericalState& {
    auto it = index.find(node_id);
    if (it == index.end())
      throw std::invalid_argument("message_passing_step: unknown node id " +
                                  std::to_string(node_id));
    return states[it->second];
  };

  std::vector<SphericalState> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const SphericalState& self = states[i];

    Eigen::VectorXd msg = Eigen::VectorXd::Zero(self.h.size());
    int incident = 0;
    for (const Hyperedge& e : hyperedges) {
      if (std::find(e.begin(), e.end(), self.node_id) == e.end()) continue;
      std::vector<SphericalState> members;
      members.reserve(e.size());
      for (int j : e) members.push_back(at(j));
      const Eigen::VectorXd alpha =
          angular_attention(self, members, params.kappa_a);
      for (std::size_t j = 0; j < members.size(); ++j)
        msg += alpha[j] * members[j].h;
      ++incident;
    }
    if (incident > 0) msg /= static_cast<double>(incident);

    Eigen::VectorXd causal = Eigen::VectorXd::Zero(self.h.size());
    if (auto it = parents.find(self.node_id); it != parents.end()) {
      for (int p : it->second)
        causal += params.gates.get(p, self.node_id) * (params.W_c * at(p).h);
    }

    Eigen::VectorXd u = self.h + msg + causal;
    const double n = u.norm();
    if (n <= 1e-12)
      throw DegenerateError("message_passing_step: aggregate vanished at node " +
                            std::to_string(self.node_id));
    out[i] = SphericalState{u / n, self.node_id, self.t};
  }
  return out;
}

double angle_distortion(const std::vector<Eigen::VectorXd>& points,
                        const Eigen::MatrixXd& W) {
  if (points.size() < 2)
    throw std::invalid_argument("angle_distortion: need at least 2 points");
  std::vector<Eigen::VectorXd> orig, proj;
  orig.reserve(points.size());
  proj.reserve(points.size());
  for (const auto& x : points) {
    const double nx = x.norm();
    Eigen::VectorXd y = W * x;
    const double ny = y.norm();
    if (nx <= 1e-12 || ny <= 1e-12)
      throw DegenerateError("angle_distortion: degenerate image");
    orig.push_back(x / nx);
    proj.push_back(y / ny);
  }
  double worst = 0.0;
  for (std::size_t a = 0; a + 1 < points.size(); ++a)
    for (std::size_t b = a + 1; b < points.size(); ++b)
      worst = std::max(worst, std::abs(proj[a].dot(proj[b]) - orig[a].dot(orig[b])));
  return worst;
}

}  // namespace sphunc
