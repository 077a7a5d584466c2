#include "sphunc/scm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "sphunc/rng.hpp"
#include "sphunc/vmf.hpp"

namespace sphunc {

std::vector<std::vector<int>> ScmModel::parent_sets() const {
  std::vector<std::vector<int>> ps(n_nodes);
  for (const auto& e : edges) ps[e.dst].push_back(e.src);
  for (auto& p : ps) std::sort(p.begin(), p.end());
  return ps;
}

double ScmModel::readout(const Eigen::MatrixXd& states) const {
  double y = readout_bias;
  for (std::size_t k = 0; k < readout_nodes.size(); ++k)
    y += readout_w[k].dot(states.col(readout_nodes[k]));
  return y;
}

Eigen::MatrixXd structural_direction(const ScmModel& model,
                                     const Eigen::MatrixXd& prev,
                                     const Eigen::MatrixXd& features) {
  if (prev.rows() != model.dim || prev.cols() != model.n_nodes)
    throw std::invalid_argument("scm: state shape mismatch");

  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(model.dim, model.n_nodes);
  for (const auto& e : model.edges) drift.col(e.dst) += e.weight * prev.col(e.src);
  if (model.feat_proj.size() > 0 && features.size() > 0) {
    drift += model.feat_proj * features;
    drift.colwise() += model.feat_bias;
  }
  for (int i = 0; i < model.n_nodes; ++i)
    drift.col(i) += model.exo_strength[i] * model.exo_dir[i];

  for (int i = 0; i < model.n_nodes; ++i) {
    const double norm = drift.col(i).norm();
    if (norm <= 1e-12)
      throw DegenerateError("scm: zero structural direction at node " +
                            std::to_string(i));
    drift.col(i) /= norm;
  }
  return drift;
}

Eigen::MatrixXd forward_step(const ScmModel& model, const Eigen::MatrixXd& prev,
                             const Eigen::MatrixXd& features,
                             std::uint64_t seed) {
  Eigen::MatrixXd next = structural_direction(model, prev, features);
  if (model.noise_kappa >= kDeterministicKappa) return next;
  for (int i = 0; i < model.n_nodes; ++i) {
    next.col(i) = vmf::sample(vmf::VmfBelief(next.col(i), model.noise_kappa), 1,
                              rng::derive(seed, 0xf0d, i))[0];
  }
  return next;
}

std::vector<Eigen::MatrixXd> simulate(const ScmModel& model,
                                      const Eigen::MatrixXd& init,
                                      const std::vector<Eigen::MatrixXd>& features,
                                      int horizon, std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  static const Eigen::MatrixXd kNoFeatures;
  std::vector<Eigen::MatrixXd> traj;
  traj.reserve(horizon + 1);
  traj.push_back(init);
  for (int t = 1; t <= horizon; ++t) {
    const Eigen::MatrixXd& feat =
        (static_cast<int>(features.size()) >= t) ? features[t - 1] : kNoFeatures;
    traj.push_back(forward_step(model, traj.back(), feat,
                                rng::derive(seed, kSimStepStream, t)));
  }
  return traj;
}

Eigen::VectorXd intervene(const ScmModel& model, const InterventionSpec& spec,
                          const Eigen::MatrixXd& init,
                          const std::vector<Eigen::MatrixXd>& features,
                          std::uint64_t seed) {
  if (spec.horizon < 1 || spec.n_samples < 1)
    throw std::invalid_argument("intervene: horizon and n_samples must be >= 1");
  for (const auto& [node, h] : spec.targets) {
    if (node < 0 || node >= model.n_nodes)
      throw std::invalid_argument("intervene: unknown target node " +
                                  std::to_string(node));
    if (h.size() != model.dim || std::abs(h.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("intervene: target state must be unit length");
  }

  auto pin = [&](Eigen::MatrixXd& states) {
    for (const auto& [node, h] : spec.targets) states.col(node) = h;
  };

  static const Eigen::MatrixXd kNoFeatures;
  Eigen::VectorXd ys(spec.n_samples);
  for (int s = 0; s < spec.n_samples; ++s) {
    const std::uint64_t sample_seed = rng::derive(seed, 0xd0, s);
    Eigen::MatrixXd states = init;
    if (spec.start_t <= 0) pin(states);
    for (int t = 1; t <= spec.horizon; ++t) {
      const Eigen::MatrixXd& feat =
          (static_cast<int>(features.size()) >= t) ? features[t - 1] : kNoFeatures;
      states = forward_step(model, states, feat,
                            rng::derive(sample_seed, kSimStepStream, t));
      const bool active = spec.pulse ? (t == spec.start_t) : (t >= spec.start_t);
      if (active) pin(states);
    }
    ys[s] = model.readout(states);
  }
  return ys;
}

CausalEntropyResult causal_entropy(const std::vector<double>& samples,
                                   EntropyEstimator estimator,
                                   double var_floor) {
  if (samples.size() < 2)
    throw std::invalid_argument("causal_entropy: need at least 2 samples");
  const int n = static_cast<int>(samples.size());

  CausalEntropyResult result;
  if (estimator == EntropyEstimator::kGaussianPlugin) {
    double mean = 0.0;
    for (double y : samples) mean += y;
    mean /= n;
    double var = 0.0;
    for (double y : samples) var += (y - mean) * (y - mean);
    var /= (n - 1);
    result.degenerate = var <= var_floor;
    result.value = 0.5 * std::log(2.0 * M_PI * M_E * std::max(var, var_floor));
    return result;
  }

  // Freedman-Diaconis histogram estimator for possibly multimodal Y.
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = sorted[static_cast<std::size_t>(0.25 * (n - 1))];
  const double q3 = sorted[static_cast<std::size_t>(0.75 * (n - 1))];
  const double iqr = q3 - q1;
  const double lo = sorted.front(), hi = sorted.back();
  if (iqr <= 0.0 || hi <= lo) {
    result.degenerate = true;
    result.value = 0.5 * std::log(2.0 * M_PI * M_E * var_floor);
    return result;
  }
  const double width = 2.0 * iqr / std::cbrt(double(n));
  const int bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 1, 4096);
  const double bw = (hi - lo) / bins;
  std::vector<double> p(bins, 0.0);
  for (double y : sorted) {
    int k = std::min(bins - 1, static_cast<int>((y - lo) / bw));
    p[k] += 1.0 / n;
  }
  double h = 0.0;
  for (double pk : p)
    if (pk > 0.0) h -= pk * std::log(pk / bw);
  result.value = h;
  return result;
}

namespace {

struct SubsetFit {
  double bic = 0.0;
};

// Pooled BIC of regressing node dst's coordinates on the lag-1 coordinates
// of the given parent subset (plus intercept).
SubsetFit bic_of_subset(const LatentSeries& series, int dst,
                        const std::vector<int>& subset) {
  const int T = static_cast<int>(series[0].rows());
  const int dim = static_cast<int>(series[0].cols());
  const int rows = T - 1;
  const int p = static_cast<int>(subset.size()) * dim + 1;

  Eigen::MatrixXd X(rows, p);
  for (int t = 1; t < T; ++t) {
    int col = 0;
    for (int src : subset) {
      X.block(t - 1, col, 1, dim) = series[src].row(t - 1);
      col += dim;
    }
    X(t - 1, p - 1) = 1.0;
  }
  Eigen::MatrixXd Y(rows, dim);
  for (int t = 1; t < T; ++t) Y.row(t - 1) = series[dst].row(t);

  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += 1e-10 * std::max(1.0, gram.trace() / p);
  const Eigen::MatrixXd beta = gram.ldlt().solve(X.transpose() * Y);
  const double rss = (Y - X * beta).squaredNorm();

  const double n_obs = static_cast<double>(rows) * dim;
  const double k_par = static_cast<double>(p) * dim;
  SubsetFit fit;
  fit.bic = n_obs * std::log(std::max(rss, 1e-300) / n_obs) +
            k_par * std::log(n_obs);
  return fit;
}

void enumerate_subsets(const std::vector<int>& pool, int max_size,
                       std::vector<std::vector<int>>& out) {
  const int m = static_cast<int>(pool.size());
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    if (std::popcount(mask) > max_size) continue;
    std::vector<int> subset;
    for (int b = 0; b < m; ++b)
      if (mask & (1u << b)) subset.push_back(pool[b]);
    out.push_back(std::move(subset));
  }
}

}  // namespace

StructurePosterior identification_confidence(
    const LatentSeries& series, const std::vector<EdgeScore>& candidates,
    int sparsity_s, int top_m) {
  const int n = static_cast<int>(series.size());
  if (candidates.empty())
    throw std::invalid_argument("identification_confidence: no candidates");

  StructurePosterior posterior;
  posterior.nodes.resize(n);
  double log_geo = 0.0;
  for (int dst = 0; dst < n; ++dst) {
    std::vector<EdgeScore> into;
    for (const auto& e : candidates)
      if (e.dst == dst && e.src != dst) into.push_back(e);
    std::sort(into.begin(), into.end(),
              [](const EdgeScore& a, const EdgeScore& b) { return a.score > b.score; });
    if (static_cast<int>(into.size()) > top_m) into.resize(top_m);

    std::vector<std::vector<int>> subsets;
    if (into.empty()) {
      subsets.push_back({});  // no candidates: the empty set is the one option
    } else {
      std::vector<int> pool;
      for (const auto& e : into) pool.push_back(e.src);
      enumerate_subsets(pool, sparsity_s, subsets);
    }

    std::vector<double> bics;
    bics.reserve(subsets.size());
    for (const auto& sub : subsets)
      bics.push_back(bic_of_subset(series, dst, sub).bic);
    const double best = *std::min_element(bics.begin(), bics.end());
    double total = 0.0;
    std::vector<double> weights(bics.size());
    for (std::size_t i = 0; i < bics.size(); ++i) {
      weights[i] = std::exp(-0.5 * (bics[i] - best));
      total += weights[i];
    }

    auto& node = posterior.nodes[dst];
    for (std::size_t i = 0; i < subsets.size(); ++i)
      node.candidates.push_back({subsets[i], weights[i] / total});
    std::sort(node.candidates.begin(), node.candidates.end(),
              [](const auto& a, const auto& b) { return a.weight > b.weight; });
    node.map_confidence = node.candidates.front().weight;
    log_geo += std::log(node.map_confidence);
  }
  posterior.overall_confidence = std::exp(log_geo / n);
  return posterior;
}

ScmModel fit_scm(const LatentSeries& series,
                 const std::vector<std::vector<int>>& parents) {
  const int n = static_cast<int>(series.size());
  const int T = static_cast<int>(series[0].rows());
  const int dim = static_cast<int>(series[0].cols());
  const int rows = T - 1;

  ScmModel model;
  model.dim = dim;
  model.n_nodes = n;
  model.exo_dir.assign(n, Eigen::VectorXd::Zero(dim));
  model.exo_strength = Eigen::VectorXd::Zero(n);

  double cos_sum = 0.0;
  int cos_count = 0;
  for (int dst = 0; dst < n; ++dst) {
    const auto& ps = parents[dst];
    const int p = static_cast<int>(ps.size()) * dim + 1;
    Eigen::MatrixXd X(rows, p);
    Eigen::MatrixXd Y(rows, dim);
    for (int t = 1; t < T; ++t) {
      int col = 0;
      for (int src : ps) {
        X.block(t - 1, col, 1, dim) = series[src].row(t - 1);
        col += dim;
      }
      X(t - 1, p - 1) = 1.0;
      Y.row(t - 1) = series[dst].row(t);
    }
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += 1e-9 * std::max(1.0, gram.trace() / p);
    const auto solver = gram.ldlt();
    Eigen::MatrixXd beta = solver.solve(X.transpose() * Y);
    // The observed states are normalized, so the plain regression absorbs a
    // per-row scale 1/|drift_t|. Refit against scale-corrected targets
    // |pred_t| * h_t; the residual global scale is irrelevant after
    // normalization.
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::MatrixXd target(rows, dim);
      const Eigen::MatrixXd pred = X * beta;
      for (int r = 0; r < rows; ++r) {
        const double s = std::max(pred.row(r).norm(), 1e-6);
        target.row(r) = s * Y.row(r);
      }
      beta = solver.solve(X.transpose() * target);
    }

    for (std::size_t k = 0; k < ps.size(); ++k) {
      ScmEdge e;
      e.src = ps[k];
      e.dst = dst;
      // beta block maps src coords to dst coords; stored as weight acting on
      // column vectors.
      e.weight = beta.middleRows(static_cast<int>(k) * dim, dim).transpose();
      model.edges.push_back(std::move(e));
    }
    const Eigen::VectorXd intercept = beta.row(p - 1).transpose();
    const double inorm = intercept.norm();
    if (inorm > 1e-12) {
      model.exo_dir[dst] = intercept / inorm;
      model.exo_strength[dst] = inorm;
    } else {
      model.exo_dir[dst] = Eigen::VectorXd::Unit(dim, 0);
      model.exo_strength[dst] = 0.0;
    }

    const Eigen::MatrixXd pred = X * beta;
    for (int r = 0; r < rows; ++r) {
      const double pn = pred.row(r).norm();
      if (pn > 1e-12) {
        cos_sum += pred.row(r).dot(Y.row(r)) / pn;
        ++cos_count;
      }
    }
  }

  const double rbar =
      cos_count > 0 ? std::clamp(cos_sum / cos_count, 0.0, 1.0) : 0.0;
  if (rbar >= 1.0 - 1e-12) {
    model.noise_kappa = kDeterministicKappa;
  } else {
    model.noise_kappa =
        std::min(vmf::solve_concentration(dim, rbar), kDeterministicKappa);
  }
  return model;
}

}  // namespace sphunc
