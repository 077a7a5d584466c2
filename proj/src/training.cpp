#include "sphunc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sphunc/rng.hpp"
#include "sphunc/structure.hpp"
#include "sphunc/vmf.hpp"

namespace sphunc {

double ModelParams::edge_scale(std::size_t k) const {
  const EdgeCoeff& e = edge_coeffs[k];
  if (gates_trainable) return sigmoid(e.raw);
  return gates.get(e.src, e.dst) * e.value;
}

namespace {

// Applies fn to every trainable array/scalar in a fixed order shared by
// flatten, unflatten and the gradient accumulator.
template <typename P, typename FM, typename FS>
void visit_params(P& p, FM&& mat, FS&& scalar) {
  mat(p.W);
  mat(p.b);
  mat(p.kappa_head.W1);
  mat(p.kappa_head.b1);
  mat(p.kappa_head.w2);
  scalar(p.kappa_head.b2);
  for (auto& layer : p.layers) {
    scalar(layer.log_kappa_a);
    mat(layer.W_c);
  }
  for (auto& e : p.edge_coeffs) {
    if (p.gates_trainable)
      scalar(e.raw);
    else
      scalar(e.value);
  }
  mat(p.alea.W1);
  mat(p.alea.b1);
  mat(p.alea.w2);
  scalar(p.alea.b2);
  mat(p.fusion.A1_raw);
  mat(p.fusion.c1);
  mat(p.fusion.A2_raw);
  mat(p.fusion.c2);
  mat(p.fusion.a3_raw);
  scalar(p.fusion.c3);
  mat(p.fusion.skip_raw);
  mat(p.readout_W);
  mat(p.readout_b);
}

int param_count(const ModelParams& p) {
  int n = 0;
  visit_params(const_cast<ModelParams&>(p),
               [&](auto& m) { n += static_cast<int>(m.size()); },
               [&](double&) { ++n; });
  return n;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams g = p;
  visit_params(g, [](auto& m) { m.setZero(); }, [](double& s) { s = 0.0; });
  return g;
}

}  // namespace

Eigen::VectorXd flatten(const ModelParams& params) {
  Eigen::VectorXd v(param_count(params));
  int off = 0;
  visit_params(const_cast<ModelParams&>(params),
               [&](auto& m) {
                 for (int i = 0; i < m.size(); ++i) v[off++] = m.data()[i];
               },
               [&](double& s) { v[off++] = s; });
  return v;
}

void unflatten(const Eigen::VectorXd& v, ModelParams& params) {
  int off = 0;
  visit_params(params,
               [&](auto& m) {
                 for (int i = 0; i < m.size(); ++i) m.data()[i] = v[off++];
               },
               [&](double& s) { s = v[off++]; });
  if (off != v.size())
    throw std::invalid_argument("unflatten: parameter count mismatch");
}

ModelParams init_model(const TrainConfig& config, int feat_dim, int n_outputs,
                       bool classification, std::uint64_t seed) {
  auto eng = rng::make_engine(rng::derive(seed, 0x1417));
  const int D = config.d_sphere;

  ModelParams p;
  p.W = rng::gaussian_matrix(D, feat_dim, eng, 1.0 / std::sqrt(double(feat_dim)));
  // Small jitter keeps the projection away from zero even when dropout
  // blanks an entire feature column.
  p.b = rng::gaussian_matrix(D, 1, eng, 0.01).col(0);

  p.kappa_head.W1 =
      rng::gaussian_matrix(config.kappa_hidden, D, eng, 1.0 / std::sqrt(double(D)));
  p.kappa_head.b1 = Eigen::VectorXd::Zero(config.kappa_hidden);
  p.kappa_head.w2 = rng::gaussian_matrix(config.kappa_hidden, 1, eng,
                                         1.0 / std::sqrt(double(config.kappa_hidden)))
                        .col(0);
  p.kappa_head.b2 = 0.0;

  p.layers.resize(config.mp_layers);
  for (auto& layer : p.layers) {
    layer.log_kappa_a = 0.0;
    layer.W_c = rng::gaussian_matrix(D, D, eng, 0.3 / std::sqrt(double(D)));
  }

  p.gates_trainable = config.gates_trainable;
  p.alea = AleatoricParams::random_init(feat_dim, config.alea_hidden,
                                        rng::derive(seed, 0xa1));
  p.fusion = FusionParams::random_init(config.fusion_hidden,
                                       rng::derive(seed, 0xf2));
  p.readout_W =
      rng::gaussian_matrix(n_outputs, D, eng, 1.0 / std::sqrt(double(D)));
  p.readout_b = Eigen::VectorXd::Zero(n_outputs);
  p.classification = classification;
  return p;
}

namespace {

struct EdgeAtt {
  const Hyperedge* edge = nullptr;
  Eigen::VectorXd alpha;
  Eigen::VectorXd dots;
};

struct LayerCache {
  std::vector<Eigen::VectorXd> h_in;
  std::vector<std::vector<EdgeAtt>> atts;   // per node, incident edges
  std::vector<double> inv_edges;
  std::vector<Eigen::VectorXd> u;           // pre-normalization aggregate
  std::vector<double> unorm;
  std::vector<Eigen::VectorXd> h_out;
};

struct StepCache {
  Eigen::MatrixXd x;                 // (possibly dropped) features, d x N
  std::vector<Eigen::VectorXd> u0;   // projection pre-normalization
  std::vector<double> u0norm;
  std::vector<Eigen::VectorXd> h0;   // normalized projection
  std::vector<LayerCache> layers;

  const std::vector<Eigen::VectorXd>& final_h() const {
    return layers.empty() ? h0 : layers.back().h_out;
  }
};

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& x, double rate,
                              std::uint64_t seed) {
  if (rate <= 0.0) return x;
  auto eng = rng::make_engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  Eigen::MatrixXd out = x;
  for (int j = 0; j < out.cols(); ++j)
    for (int i = 0; i < out.rows(); ++i)
      out(i, j) = u(eng) < keep ? out(i, j) / keep : 0.0;
  return out;
}

// Encoder forward for one timestep with full caches.
StepCache encode_step(const ModelParams& p, const TemporalHypergraph& data,
                      int t, double dropout, std::uint64_t dropout_seed) {
  const int N = data.n_nodes;
  StepCache cache;
  cache.x = apply_dropout(data.features[t], dropout,
                          rng::derive(dropout_seed, 0xd20, t));

  std::vector<Eigen::VectorXd> h(N);
  cache.u0.resize(N);
  cache.u0norm.resize(N);
  cache.h0.resize(N);
  for (int i = 0; i < N; ++i) {
    cache.u0[i] = p.W * cache.x.col(i) + p.b;
    cache.u0norm[i] = cache.u0[i].norm();
    if (cache.u0norm[i] <= 1e-12)
      throw DegenerateError("encode_step: degenerate projection at node " +
                            std::to_string(i));
    h[i] = cache.u0[i] / cache.u0norm[i];
    cache.h0[i] = h[i];
  }

  const auto& edges = data.hyperedges[t];
  cache.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    LayerCache& lc = cache.layers[l];
    const double kappa_a = p.layers[l].kappa_a();
    lc.h_in = h;
    lc.atts.assign(N, {});
    lc.inv_edges.assign(N, 0.0);
    lc.u.resize(N);
    lc.unorm.resize(N);
    lc.h_out.resize(N);

    std::vector<Eigen::VectorXd> msg(N, Eigen::VectorXd::Zero(p.latent_dim()));
    std::vector<int> incident(N, 0);
    for (const auto& e : edges) {
      for (int i : e) {
        EdgeAtt att;
        att.edge = &e;
        att.dots.resize(e.size());
        for (std::size_t j = 0; j < e.size(); ++j)
          att.dots[j] = h[i].dot(h[e[j]]);
        Eigen::VectorXd sc = kappa_a * att.dots;
        sc.array() -= sc.maxCoeff();
        att.alpha = sc.array().exp();
        att.alpha /= att.alpha.sum();
        for (std::size_t j = 0; j < e.size(); ++j)
          msg[i] += att.alpha[j] * h[e[j]];
        lc.atts[i].push_back(std::move(att));
        ++incident[i];
      }
    }
    for (int i = 0; i < N; ++i)
      if (incident[i] > 0) {
        lc.inv_edges[i] = 1.0 / incident[i];
        msg[i] *= lc.inv_edges[i];
      }

    std::vector<Eigen::VectorXd> causal(N, Eigen::VectorXd::Zero(p.latent_dim()));
    for (std::size_t k = 0; k < p.edge_coeffs.size(); ++k) {
      const auto& e = p.edge_coeffs[k];
      causal[e.dst] += p.edge_scale(k) * (p.layers[l].W_c * h[e.src]);
    }

    for (int i = 0; i < N; ++i) {
      lc.u[i] = h[i] + msg[i] + causal[i];
      lc.unorm[i] = lc.u[i].norm();
      if (lc.unorm[i] <= 1e-12)
        throw DegenerateError("encode_step: degenerate aggregate at node " +
                              std::to_string(i));
      lc.h_out[i] = lc.u[i] / lc.unorm[i];
    }
    h = lc.h_out;
  }
  return cache;
}

// Backward through the normalization y = u / |u|.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& y, double unorm) {
  return (g - g.dot(y) * y) / unorm;
}

struct HeadForward {
  // kappa head
  Eigen::VectorXd kh_a;
  double kh_z = 0.0;
  double kappa = 0.0;
  double u_epi = 0.0;
  // aleatoric
  Eigen::VectorXd al_a;
  double al_z = 0.0;
  double sigma2 = 0.0;
  // fusion
  Eigen::VectorXd f_z1, f_z2;
  double u_total = 0.0;
  // prediction
  Eigen::VectorXd out;   // logits or value
  Eigen::VectorXd probs; // classification only
};

HeadForward heads_forward(const ModelParams& p, const Eigen::VectorXd& h,
                          const Eigen::VectorXd& x) {
  HeadForward f;
  const auto& kh = p.kappa_head;
  f.kh_a = (kh.W1 * h + kh.b1).array().tanh();
  f.kh_z = kh.w2.dot(f.kh_a) + kh.b2;
  f.kappa = kh.kappa_min + (kh.kappa_max - kh.kappa_min) * sigmoid(f.kh_z);
  f.u_epi = vmf::entropy(static_cast<int>(h.size()), f.kappa);

  f.al_a = (p.alea.W1 * x + p.alea.b1).array().tanh();
  f.al_z = p.alea.w2.dot(f.al_a) + p.alea.b2;
  f.sigma2 = softplus(f.al_z);

  const auto& fu = p.fusion;
  Eigen::Vector2d in(f.u_epi, f.sigma2);
  f.f_z1 = (fu.A1_raw.array().square().matrix() * in + fu.c1).array().tanh();
  f.f_z2 = (fu.A2_raw.array().square().matrix() * f.f_z1 + fu.c2).array().tanh();
  f.u_total = fu.a3_raw.array().square().matrix().dot(f.f_z2) + fu.c3 +
              fu.skip_raw[0] * fu.skip_raw[0] * f.u_epi +
              fu.skip_raw[1] * fu.skip_raw[1] * f.sigma2;

  f.out = p.readout_W * h + p.readout_b;
  if (p.classification) {
    Eigen::VectorXd e = (f.out.array() - f.out.maxCoeff()).exp();
    f.probs = e / e.sum();
  }
  return f;
}

}  // namespace

LatentSeries encode_series(const ModelParams& params,
                           const TemporalHypergraph& data) {
  LatentSeries series(data.n_nodes,
                      Eigen::MatrixXd(data.timesteps, params.latent_dim()));
  for (int t = 0; t < data.timesteps; ++t) {
    const StepCache cache = encode_step(params, data, t, 0.0, 0);
    const auto& h = cache.final_h();
    for (int i = 0; i < data.n_nodes; ++i) series[i].row(t) = h[i].transpose();
  }
  return series;
}

LossParts loss_and_grad(const ModelParams& params, const Batch& batch,
                        const LossWeights& weights, Eigen::VectorXd* grad) {
  const TemporalHypergraph& data = *batch.data;
  const int N = data.n_nodes;
  const int D = params.latent_dim();
  const bool want_grad = grad != nullptr;

  ModelParams g = want_grad ? zeros_like(params) : ModelParams{};

  // Count items first so per-item gradients can be scaled by 1/n.
  int n_items = 0;
  for (int t : batch.timesteps)
    for (int i = 0; i < N; ++i)
      if (data.has_target(t, i)) ++n_items;
  if (n_items == 0) throw std::invalid_argument("loss: batch has no targets");
  const double inv_n = 1.0 / n_items;

  LossParts parts;
  for (int t : batch.timesteps) {
    StepCache cache =
        encode_step(params, data, t, batch.dropout, batch.dropout_seed);
    const auto& h_final =
        cache.final_h();

    std::vector<Eigen::VectorXd> grad_h(N, Eigen::VectorXd::Zero(D));
    for (int i = 0; i < N; ++i) {
      if (!data.has_target(t, i)) continue;
      const HeadForward f = heads_forward(params, h_final[i], cache.x.col(i));

      // Prediction loss.
      Eigen::VectorXd dout;
      if (params.classification) {
        const int label = static_cast<int>(data.targets(t, i));
        parts.pred += -std::log(std::max(f.probs[label], 1e-300)) * inv_n;
        if (want_grad) {
          dout = f.probs;
          dout[label] -= 1.0;
          dout *= inv_n;
        }
      } else {
        const double r = f.out[0] - data.targets(t, i);
        parts.pred += r * r * inv_n;
        if (want_grad) {
          dout = Eigen::VectorXd::Constant(1, 2.0 * r * inv_n);
        }
      }

      // Entropy-calibration loss against the frozen proxy.
      const double proxy = batch.proxy(t, i);
      const double dcal = f.u_total - proxy;
      parts.entropy += dcal * dcal * inv_n;

      if (!want_grad) continue;

      g.readout_W += dout * h_final[i].transpose();
      g.readout_b += dout;
      Eigen::VectorXd gh = params.readout_W.transpose() * dout;

      // Backprop the calibration term through fusion.
      const double gU_total = weights.lambda1 * 2.0 * dcal * inv_n;
      const auto& fu = params.fusion;
      const Eigen::MatrixXd A1e = fu.A1_raw.array().square();
      const Eigen::MatrixXd A2e = fu.A2_raw.array().square();
      const Eigen::VectorXd a3e = fu.a3_raw.array().square();

      g.fusion.a3_raw += gU_total * f.f_z2.cwiseProduct(2.0 * fu.a3_raw);
      g.fusion.c3 += gU_total;
      g.fusion.skip_raw[0] += gU_total * f.u_epi * 2.0 * fu.skip_raw[0];
      g.fusion.skip_raw[1] += gU_total * f.sigma2 * 2.0 * fu.skip_raw[1];

      Eigen::VectorXd dz2 =
          (gU_total * a3e.array() * (1.0 - f.f_z2.array().square())).matrix();
      g.fusion.A2_raw += (dz2 * f.f_z1.transpose()).cwiseProduct(2.0 * fu.A2_raw);
      g.fusion.c2 += dz2;
      Eigen::VectorXd dz1 =
          ((A2e.transpose() * dz2).array() * (1.0 - f.f_z1.array().square()))
              .matrix();
      Eigen::Vector2d in(f.u_epi, f.sigma2);
      g.fusion.A1_raw += (dz1 * in.transpose()).cwiseProduct(2.0 * fu.A1_raw);
      g.fusion.c1 += dz1;
      const Eigen::Vector2d din = A1e.transpose() * dz1;
      const double dU_epi =
          din[0] + gU_total * fu.skip_raw[0] * fu.skip_raw[0];
      const double dSigma2 =
          din[1] + gU_total * fu.skip_raw[1] * fu.skip_raw[1];

      // Aleatoric head backward.
      const double dal_z = dSigma2 * sigmoid(f.al_z);
      g.alea.w2 += dal_z * f.al_a;
      g.alea.b2 += dal_z;
      const Eigen::VectorXd dal_a =
          (params.alea.w2.array() * (1.0 - f.al_a.array().square())).matrix() *
          dal_z;
      g.alea.W1 += dal_a * cache.x.col(i).transpose();
      g.alea.b1 += dal_a;

      // Kappa head backward: dU_epi/dkappa is the entropy derivative.
      const auto& kh = params.kappa_head;
      const double sig = sigmoid(f.kh_z);
      const double dk_dz = (kh.kappa_max - kh.kappa_min) * sig * (1.0 - sig);
      const double dkh_z =
          dU_epi * vmf::entropy_derivative(D, f.kappa) * dk_dz;
      g.kappa_head.w2 += dkh_z * f.kh_a;
      g.kappa_head.b2 += dkh_z;
      const Eigen::VectorXd dkh_a =
          (kh.w2.array() * (1.0 - f.kh_a.array().square())).matrix() * dkh_z;
      g.kappa_head.W1 += dkh_a * h_final[i].transpose();
      g.kappa_head.b1 += dkh_a;
      gh += kh.W1.transpose() * dkh_a;

      grad_h[i] += gh;
    }

    if (!want_grad) continue;

    // Backward through the message-passing stack.
    for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
      const LayerCache& lc = cache.layers[l];
      const double kappa_a = params.layers[l].kappa_a();
      std::vector<Eigen::VectorXd> grad_in(N, Eigen::VectorXd::Zero(D));
      double d_log_kappa = 0.0;

      for (int i = 0; i < N; ++i) {
        if (grad_h[i].isZero(0)) continue;
        const Eigen::VectorXd gu =
            normalize_backward(grad_h[i], lc.h_out[i], lc.unorm[i]);

        grad_in[i] += gu;  // residual path

        for (const EdgeAtt& att : lc.atts[i]) {
          const Hyperedge& e = *att.edge;
          const Eigen::VectorXd g_msg = lc.inv_edges[i] * gu;
          const int m = static_cast<int>(e.size());
          Eigen::VectorXd dalpha(m);
          for (int j = 0; j < m; ++j) dalpha[j] = g_msg.dot(lc.h_in[e[j]]);
          const double avg = att.alpha.dot(dalpha);
          Eigen::VectorXd ds(m);
          for (int j = 0; j < m; ++j) ds[j] = att.alpha[j] * (dalpha[j] - avg);
          for (int j = 0; j < m; ++j) {
            grad_in[e[j]] += att.alpha[j] * g_msg + ds[j] * kappa_a * lc.h_in[i];
            grad_in[i] += ds[j] * kappa_a * lc.h_in[e[j]];
            d_log_kappa += ds[j] * att.dots[j] * kappa_a;
          }
        }

        for (std::size_t k = 0; k < params.edge_coeffs.size(); ++k) {
          const auto& e = params.edge_coeffs[k];
          if (e.dst != i) continue;
          const double scale = params.edge_scale(k);
          g.layers[l].W_c += scale * gu * lc.h_in[e.src].transpose();
          grad_in[e.src] += scale * params.layers[l].W_c.transpose() * gu;
          const double dscale = gu.dot(params.layers[l].W_c * lc.h_in[e.src]);
          if (params.gates_trainable) {
            const double s = sigmoid(e.raw);
            g.edge_coeffs[k].raw += dscale * s * (1.0 - s);
          } else {
            g.edge_coeffs[k].value += dscale * params.gates.get(e.src, e.dst);
          }
        }
      }
      g.layers[l].log_kappa_a += d_log_kappa;
      grad_h = std::move(grad_in);
    }

    // Projection backward.
    for (int i = 0; i < N; ++i) {
      if (grad_h[i].isZero(0)) continue;
      const Eigen::VectorXd h0 = cache.u0[i] / cache.u0norm[i];
      const Eigen::VectorXd gu = normalize_backward(grad_h[i], h0, cache.u0norm[i]);
      g.W += gu * cache.x.col(i).transpose();
      g.b += gu;
    }
  }

  // Causal regularizer: gate-weighted L1 of the structural coefficients.
  for (std::size_t k = 0; k < params.edge_coeffs.size(); ++k) {
    const auto& e = params.edge_coeffs[k];
    if (params.gates_trainable) {
      const double s = sigmoid(e.raw);
      parts.causal += s;
      if (want_grad)
        g.edge_coeffs[k].raw += weights.lambda2 * s * (1.0 - s);
    } else {
      const double gamma = params.gates.get(e.src, e.dst);
      parts.causal += gamma * std::abs(e.value);
      if (want_grad)
        g.edge_coeffs[k].value +=
            weights.lambda2 * gamma * (e.value >= 0.0 ? 1.0 : -1.0);
    }
  }

  parts.total =
      parts.pred + weights.lambda1 * parts.entropy + weights.lambda2 * parts.causal;
  if (want_grad) *grad = flatten(g);
  return parts;
}

LossParts composite_loss(const ModelParams& params, const Batch& batch,
                         const LossWeights& weights) {
  return loss_and_grad(params, batch, weights, nullptr);
}

double grad_check(const ModelParams& params, const Batch& batch,
                  const LossWeights& weights, int n_coords, std::uint64_t seed) {
  Eigen::VectorXd analytic;
  loss_and_grad(params, batch, weights, &analytic);

  Eigen::VectorXd theta = flatten(params);
  ModelParams work = params;
  auto eng = rng::make_engine(rng::derive(seed, 0x9c));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(theta.size()) - 1);

  double worst = 0.0;
  for (int c = 0; c < n_coords; ++c) {
    const int idx = pick(eng);
    const double step = 1e-5;
    Eigen::VectorXd tp = theta, tm = theta;
    tp[idx] += step;
    tm[idx] -= step;
    unflatten(tp, work);
    const double fp = composite_loss(work, batch, weights).total;
    unflatten(tm, work);
    const double fm = composite_loss(work, batch, weights).total;
    const double fd = (fp - fm) / (2.0 * step);
    const double an = analytic[idx];
    // Central differences at this step resolve gradients down to ~1e-8
    // absolute on O(1) losses; differences below that floor count as
    // agreement, above it the error is relative with a magnitude floor.
    const double diff = std::abs(fd - an);
    if (diff <= 1e-8) continue;
    const double mag = std::max({std::abs(fd), std::abs(an), 1e-5});
    worst = std::max(worst, diff / mag);
  }
  return worst;
}

namespace {

// T x N residual matrix in eval mode: regression residual or 1 - p_true.
Eigen::MatrixXd residual_matrix(const ModelParams& params,
                                const TemporalHypergraph& data) {
  Eigen::MatrixXd resid = Eigen::MatrixXd::Constant(
      data.timesteps, data.n_nodes, std::nan(""));
  for (int t = 0; t < data.timesteps; ++t) {
    StepCache cache = encode_step(params, data, t, 0.0, 0);
    const auto& h = cache.final_h();
    for (int i = 0; i < data.n_nodes; ++i) {
      if (!data.has_target(t, i)) continue;
      const HeadForward f = heads_forward(params, h[i], cache.x.col(i));
      if (params.classification) {
        const int label = static_cast<int>(data.targets(t, i));
        resid(t, i) = 1.0 - f.probs[label];
      } else {
        resid(t, i) = f.out[0] - data.targets(t, i);
      }
    }
  }
  return resid;
}

Eigen::MatrixXd proxy_from_residuals(const Eigen::MatrixXd& resid, int window) {
  const int T = static_cast<int>(resid.rows());
  const int N = static_cast<int>(resid.cols());
  double global = 0.0;
  int count = 0;
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < N; ++i)
      if (std::isfinite(resid(t, i))) {
        global += resid(t, i) * resid(t, i);
        ++count;
      }
  global = count > 0 ? global / count : 0.0;

  Eigen::MatrixXd proxy = Eigen::MatrixXd::Constant(T, N, global);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      double acc = 0.0;
      int m = 0;
      for (int back = t - 1; back >= 0 && m < window; --back) {
        if (!std::isfinite(resid(back, i))) continue;
        acc += resid(back, i) * resid(back, i);
        ++m;
      }
      if (m > 0) proxy(t, i) = acc / m;
    }
  }
  return proxy;
}

void refresh_structure(ModelParams& params, const TemporalHypergraph& data,
                       const TrainConfig& config, TrainResult& result,
                       bool first_pass) {
  if (!config.learn_structure || data.timesteps < 20) return;
  LatentSeries series = encode_series(params, data);
  VarInitResult vr = var_init(series, 2, 0.01);
  bool any = false;
  for (const auto& e : vr.edges) any = any || e.significant;
  result.edge_scores = vr.edges;
  if (!any) {
    params.parents.assign(data.n_nodes, {});
    params.edge_coeffs.clear();
    params.gates = GateTable();
    return;
  }
  if (first_pass) {
    result.lasso_lambda = select_lambda(
        series, vr.edges, {5e-4, 2e-3, 8e-3, 3e-2}, config.sparsity_s, 2, 5);
  }
  CandidateStructure st =
      lasso_refine(series, vr.edges, result.lasso_lambda, config.sparsity_s, 2);
  params.gates = gate_scores(st, vr.edges);
  params.parents = st.parents;

  std::vector<EdgeCoeff> next;
  for (int dst = 0; dst < data.n_nodes; ++dst) {
    for (int src : st.parents[dst]) {
      EdgeCoeff ec;
      ec.src = src;
      ec.dst = dst;
      for (const auto& old : params.edge_coeffs)
        if (old.src == src && old.dst == dst) {
          ec = old;
          break;
        }
      next.push_back(ec);
    }
  }
  params.edge_coeffs = std::move(next);
}

}  // namespace

std::vector<UncertaintyRow> evaluate_uncertainty(const ModelParams& params,
                                                 const TemporalHypergraph& data,
                                                 int proxy_window) {
  const Eigen::MatrixXd resid = residual_matrix(params, data);
  const Eigen::MatrixXd proxy = proxy_from_residuals(resid, proxy_window);
  std::vector<UncertaintyRow> rows;
  for (int t = 0; t < data.timesteps; ++t) {
    StepCache cache = encode_step(params, data, t, 0.0, 0);
    const auto& h = cache.final_h();
    for (int i = 0; i < data.n_nodes; ++i) {
      if (!data.has_target(t, i)) continue;
      const HeadForward f = heads_forward(params, h[i], cache.x.col(i));
      UncertaintyRow row;
      row.t = t;
      row.node = i;
      row.report.u_epi = f.u_epi;
      row.report.u_alea = f.sigma2;
      row.report.u_total = f.u_total;
      row.report.u_emp = proxy(t, i);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<Prediction> predict(const ModelParams& params,
                                const TemporalHypergraph& data) {
  std::vector<Prediction> out;
  for (int t = 0; t < data.timesteps; ++t) {
    StepCache cache = encode_step(params, data, t, 0.0, 0);
    const auto& h = cache.final_h();
    for (int i = 0; i < data.n_nodes; ++i) {
      if (!data.has_target(t, i)) continue;
      const HeadForward f = heads_forward(params, h[i], cache.x.col(i));
      Prediction pr;
      pr.t = t;
      pr.node = i;
      pr.output = params.classification ? f.probs : f.out;
      pr.target = data.targets(t, i);
      out.push_back(std::move(pr));
    }
  }
  return out;
}

TrainResult train(const TrainConfig& config, const TemporalHypergraph& data,
                  const LossWeights& weights, std::uint64_t seed,
                  const ModelParams* warm_start) {
  const int n_out = data.classification ? data.n_classes : 1;
  TrainResult result;
  if (warm_start != nullptr) {
    result.params = *warm_start;  // resume: keep parameters and structure
  } else {
    result.params =
        init_model(config, data.feat_dim, n_out, data.classification, seed);
    refresh_structure(result.params, data, config, result, true);
  }
  if (config.epochs == 0) return result;

  ModelParams& params = result.params;
  const int n_par = static_cast<int>(flatten(params).size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_par);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_par);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  std::vector<int> valid_t;
  for (int t = 0; t < data.timesteps; ++t)
    for (int i = 0; i < data.n_nodes; ++i)
      if (data.has_target(t, i)) {
        valid_t.push_back(t);
        break;
      }
  if (valid_t.empty()) throw TrainingError("train: dataset has no targets");
  const int items_per_t = data.n_nodes;
  const int steps_per_batch =
      std::max(1, (config.batch + items_per_t - 1) / items_per_t);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // Refresh the held-out proxy from the current model.
    const Eigen::MatrixXd proxy = proxy_from_residuals(
        residual_matrix(params, data), config.proxy_window);

    std::vector<int> order = valid_t;
    auto eng = rng::make_engine(rng::derive(seed, 0xe9, epoch));
    std::shuffle(order.begin(), order.end(), eng);

    LossParts epoch_parts;
    int n_batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += steps_per_batch) {
      Batch batch;
      batch.data = &data;
      for (std::size_t k = pos;
           k < std::min(order.size(), pos + steps_per_batch); ++k)
        batch.timesteps.push_back(order[k]);
      batch.proxy = proxy;
      batch.dropout = config.dropout;
      batch.dropout_seed = rng::derive(seed, 0xd0b, epoch, pos);

      Eigen::VectorXd grad;
      const LossParts parts = loss_and_grad(params, batch, weights, &grad);
      if (!std::isfinite(parts.total))
        throw TrainingError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            " batch " + std::to_string(n_batches) +
            " |theta|=" + std::to_string(flatten(params).norm()));

      ++step;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      Eigen::VectorXd theta = flatten(params);
      theta -= config.lr * config.weight_decay * theta;  // decoupled decay
      theta -= config.lr *
               (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
      if (!theta.allFinite())
        throw TrainingError("train: parameters diverged at epoch " +
                            std::to_string(epoch));
      unflatten(theta, params);

      epoch_parts.total += parts.total;
      epoch_parts.pred += parts.pred;
      epoch_parts.entropy += parts.entropy;
      epoch_parts.causal += parts.causal;
      ++n_batches;
    }
    epoch_parts.total /= n_batches;
    epoch_parts.pred /= n_batches;
    epoch_parts.entropy /= n_batches;
    epoch_parts.causal /= n_batches;
    result.trace.push_back(epoch_parts);

    if (config.structure_epochs > 0 && epoch % config.structure_epochs == 0 &&
        epoch < config.epochs)
      refresh_structure(params, data, config, result,
                        result.lasso_lambda == 0.0);
  }

  result.uncertainty = evaluate_uncertainty(params, data, config.proxy_window);
  return result;
}

BcdResult block_coordinate_train(const ModelParams& frozen,
                                 const TemporalHypergraph& data,
                                 const LossWeights& weights,
                                 const BcdConfig& config) {
  // Precompute frozen latents, epistemic values and feature rows.
  struct Item {
    Eigen::VectorXd h;
    Eigen::VectorXd x;
    double u_epi = 0.0;
    double y = 0.0;
    double proxy = 0.0;
  };
  std::vector<Item> items;
  {
    const Eigen::MatrixXd resid = residual_matrix(frozen, data);
    const Eigen::MatrixXd proxy = proxy_from_residuals(resid, 10);
    for (int t = 0; t < data.timesteps; ++t) {
      StepCache cache = encode_step(frozen, data, t, 0.0, 0);
      const auto& h = cache.final_h();
      for (int i = 0; i < data.n_nodes; ++i) {
        if (!data.has_target(t, i)) continue;
        const HeadForward f = heads_forward(frozen, h[i], cache.x.col(i));
        items.push_back(
            {h[i], cache.x.col(i), f.u_epi, data.targets(t, i), proxy(t, i)});
      }
    }
  }
  if (items.empty()) throw TrainingError("bcd: no items");
  const int n = static_cast<int>(items.size());
  const int D = static_cast<int>(items[0].h.size());
  const int d = static_cast<int>(items[0].x.size());

  // Constant causal part (structure frozen in this mode).
  double causal = 0.0;
  for (std::size_t k = 0; k < frozen.edge_coeffs.size(); ++k) {
    const auto& e = frozen.edge_coeffs[k];
    causal += frozen.gates.get(e.src, e.dst) * std::abs(e.value);
  }

  BcdResult st;
  st.readout_w = Eigen::VectorXd::Zero(D);
  st.readout_b = 0.0;
  st.alea_w = Eigen::VectorXd::Zero(d);
  st.alea_b = 0.0;
  st.fuse_const = 0.0;
  st.fuse_epi = 1.0;
  st.fuse_alea = 1.0;

  auto objective = [&]() {
    double pred = 0.0, ent = 0.0;
    for (const Item& it : items) {
      const double r = st.readout_w.dot(it.h) + st.readout_b - it.y;
      pred += r * r;
      const double sigma2 = st.alea_w.dot(it.x) + st.alea_b;
      const double fused =
          st.fuse_const + st.fuse_epi * it.u_epi + st.fuse_alea * sigma2;
      const double c = fused - it.proxy;
      ent += c * c;
    }
    return pred / n + weights.lambda1 * ent / n + weights.lambda2 * causal;
  };

  auto solve_ls = [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return X.colPivHouseholderQr().solve(y).eval();
  };

  BcdResult out = st;
  out.objective.push_back(objective());
  for (int cycle = 0; cycle < config.max_cycles; ++cycle) {
    const double before_cycle = objective();
    for (BcdBlock block : config.blocks) {
      switch (block) {
        case BcdBlock::kReadout: {
          Eigen::MatrixXd X(n, D + 1);
          Eigen::VectorXd y(n);
          for (int i = 0; i < n; ++i) {
            X.row(i).head(D) = items[i].h.transpose();
            X(i, D) = 1.0;
            y[i] = items[i].y;
          }
          const Eigen::VectorXd w = solve_ls(X, y);
          st.readout_w = w.head(D);
          st.readout_b = w[D];
          break;
        }
        case BcdBlock::kAleatoric: {
          if (std::abs(st.fuse_alea) < 1e-12) break;  // objective unaffected
          Eigen::MatrixXd X(n, d + 1);
          Eigen::VectorXd y(n);
          for (int i = 0; i < n; ++i) {
            X.row(i).head(d) = items[i].x.transpose();
            X(i, d) = 1.0;
            y[i] = (items[i].proxy - st.fuse_const - st.fuse_epi * items[i].u_epi) /
                   st.fuse_alea;
          }
          const Eigen::VectorXd w = solve_ls(X, y);
          st.alea_w = w.head(d);
          st.alea_b = w[d];
          break;
        }
        case BcdBlock::kFusion: {
          Eigen::MatrixXd X(n, 3);
          Eigen::VectorXd y(n);
          for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = items[i].u_epi;
            X(i, 2) = st.alea_w.dot(items[i].x) + st.alea_b;
            y[i] = items[i].proxy;
          }
          const Eigen::VectorXd w = solve_ls(X, y);
          st.fuse_const = w[0];
          st.fuse_epi = w[1];
          st.fuse_alea = w[2];
          break;
        }
      }
      out.objective.push_back(objective());
    }
    const bool enough_updates =
        static_cast<int>(out.objective.size()) > 30;
    if (enough_updates && before_cycle - objective() < config.tol) break;
  }
  out.readout_w = st.readout_w;
  out.readout_b = st.readout_b;
  out.alea_w = st.alea_w;
  out.alea_b = st.alea_b;
  out.fuse_const = st.fuse_const;
  out.fuse_epi = st.fuse_epi;
  out.fuse_alea = st.fuse_alea;
  return out;
}

}  // namespace sphunc
