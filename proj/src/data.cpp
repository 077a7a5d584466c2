#include "sphunc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sphunc/rng.hpp"

namespace sphunc {

namespace {

constexpr int kBurnIn = 30;

void validate(const SyntheticSpec& spec) {
  if (spec.n_nodes < 2 || spec.timesteps < 4 || spec.feat_dim < 1 ||
      spec.latent_dim < 2 || spec.sparsity < 0 || spec.horizon < 0 ||
      spec.hyperedge_rate < 0.0 || spec.noise_kappa <= 0.0 ||
      (spec.classification && spec.n_classes < 2))
    throw std::invalid_argument("gen_synthetic: invalid spec");
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  auto eng = rng::make_engine(rng::derive(spec.seed, 0xda7a));
  const int N = spec.n_nodes, T = spec.timesteps;
  const int D = spec.latent_dim, d = spec.feat_dim;

  SyntheticData data;

  // True structural model: sparse random parents, shared random rotation
  // W_c scaled by per-edge gates and the coupling strength.
  ScmModel& truth = data.truth;
  truth.dim = D;
  truth.n_nodes = N;
  Eigen::MatrixXd wc_raw = rng::gaussian_matrix(D, D, eng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wc_raw);
  const Eigen::MatrixXd w_c = qr.householderQ();

  // Cross-node influence forms a DAG in node order (parents have lower ids);
  // cycles across time still arise through the lag-1 dynamics.
  std::uniform_real_distribution<double> ugate(0.5, 1.0);
  for (int i = 0; i < N; ++i) {
    std::vector<int> pool;
    for (int j = 0; j < i; ++j) pool.push_back(j);
    std::shuffle(pool.begin(), pool.end(), eng);
    const int k = std::min<int>(spec.sparsity, static_cast<int>(pool.size()));
    for (int p = 0; p < k; ++p) {
      ScmEdge e;
      e.src = pool[p];
      e.dst = i;
      e.weight = spec.coupling * ugate(eng) * w_c;
      data.true_edges.emplace_back(e.src, e.dst);
      truth.edges.push_back(std::move(e));
    }
    if (spec.self_coupling > 0.0) {
      // Momentum term; self-edges are dynamics, not part of the cross-node
      // ground truth.
      ScmEdge e;
      e.src = i;
      e.dst = i;
      e.weight = spec.self_coupling * Eigen::MatrixXd::Identity(D, D);
      truth.edges.push_back(std::move(e));
    }
  }
  for (int i = 0; i < N; ++i) truth.exo_dir.push_back(rng::uniform_sphere(D, eng));
  truth.exo_strength = Eigen::VectorXd::Constant(N, spec.exo_strength);
  truth.noise_kappa = std::min(spec.noise_kappa, kDeterministicKappa);

  // Readout on the last node (callers may override).
  truth.readout_nodes = {N - 1};
  truth.readout_w = {rng::uniform_sphere(D, eng)};

  // Simulate with burn-in so the chain forgets its random start.
  Eigen::MatrixXd init(D, N);
  for (int i = 0; i < N; ++i) init.col(i) = rng::uniform_sphere(D, eng);
  auto traj = simulate(truth, init, {}, kBurnIn + T - 1,
                       rng::derive(spec.seed, 0x51));
  data.latents.assign(traj.begin() + kBurnIn, traj.end());

  // Features: noisy linear images of the latents.
  data.obs_map = rng::gaussian_matrix(d, D, eng, 1.0 / std::sqrt(double(D)));
  TemporalHypergraph& g = data.graph;
  g.n_nodes = N;
  g.timesteps = T;
  g.feat_dim = d;
  g.horizon = spec.horizon;
  g.classification = spec.classification;
  g.n_classes = spec.classification ? spec.n_classes : 0;
  g.seed = spec.seed;
  g.features.resize(T);
  for (int t = 0; t < T; ++t)
    g.features[t] =
        data.obs_map * data.latents[t] +
        spec.obs_noise * rng::gaussian_matrix(d, N, eng);

  // Hyperedges: angular-proximity groups of size 3..5.
  g.hyperedges.resize(T);
  std::uniform_int_distribution<int> usize(3, 5);
  std::uniform_int_distribution<int> unode(0, N - 1);
  const int edges_per_t =
      std::max(1, static_cast<int>(std::lround(spec.hyperedge_rate * N)));
  for (int t = 0; t < T; ++t) {
    for (int e = 0; e < edges_per_t; ++e) {
      const int head = unode(eng);
      const int size = std::min(usize(eng), N);
      std::vector<std::pair<double, int>> near;
      for (int j = 0; j < N; ++j) {
        if (j == head) continue;
        near.emplace_back(data.latents[t].col(head).dot(data.latents[t].col(j)), j);
      }
      std::sort(near.begin(), near.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      Hyperedge edge = {head};
      for (int k = 0; k < size - 1; ++k) edge.push_back(near[k].second);
      std::sort(edge.begin(), edge.end());
      g.hyperedges[t].push_back(std::move(edge));
    }
  }

  // Targets. Regression: y = m(x) + eta with Var(eta | x) = sigma^2(x),
  // eta independent of the latent angular dispersion by construction.
  g.targets = Eigen::MatrixXd::Constant(T, N, std::nan(""));
  std::normal_distribution<double> gz(0.0, 1.0);
  if (!spec.classification) {
    data.target_w = rng::gaussian_vector(d, eng) / std::sqrt(double(d));
    data.target_c = 0.1;
    for (int t = 0; t < T; ++t) {
      const int t_mean = spec.target_mode == TargetMode::kForecast
                             ? t + spec.horizon
                             : t;
      if (t_mean >= T) continue;
      for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd x_now = g.features[t].col(i);
        const Eigen::VectorXd x_mean = g.features[t_mean].col(i);
        const double s2 = spec.alea_base +
                          std::pow(spec.alea_scale * x_now[0], 2.0);
        g.targets(t, i) =
            data.target_w.dot(x_mean) + data.target_c + std::sqrt(s2) * gz(eng);
      }
    }
  } else {
    // Class label sampled from a softmax over class directions.
    Eigen::MatrixXd class_dirs(spec.n_classes, D);
    for (int c = 0; c < spec.n_classes; ++c)
      class_dirs.row(c) = rng::uniform_sphere(D, eng).transpose();
    const double tau = 3.0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int t = 0; t < T; ++t) {
      const int t_lab = spec.target_mode == TargetMode::kForecast
                            ? t + spec.horizon
                            : t;
      if (t_lab >= T) continue;
      for (int i = 0; i < N; ++i) {
        Eigen::VectorXd logits = tau * (class_dirs * data.latents[t_lab].col(i));
        Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
        p /= p.sum();
        double r = u01(eng), cum = 0.0;
        int label = spec.n_classes - 1;
        for (int c = 0; c < spec.n_classes; ++c) {
          cum += p[c];
          if (r <= cum) {
            label = c;
            break;
          }
        }
        g.targets(t, i) = label;
      }
    }
  }
  return data;
}

double ece(const std::vector<double>& confidences,
           const std::vector<int>& correctness, int k_bins) {
  const auto bins = reliability_bins(confidences, correctness, k_bins);
  const double n = static_cast<double>(confidences.size());
  double e = 0.0;
  for (int k = 0; k < bins.k_bins; ++k)
    if (bins.count[k] > 0)
      e += bins.count[k] / n * std::abs(bins.acc[k] - bins.conf[k]);
  return e;
}

CalibrationBins reliability_bins(const std::vector<double>& confidences,
                                 const std::vector<int>& correctness,
                                 int k_bins) {
  if (confidences.size() != correctness.size() || confidences.empty())
    throw std::invalid_argument("reliability_bins: length mismatch");
  if (k_bins < 1) throw std::invalid_argument("reliability_bins: k_bins >= 1");
  for (double c : confidences)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("reliability_bins: confidence outside [0, 1]");

  CalibrationBins bins;
  bins.k_bins = k_bins;
  bins.bin_low.resize(k_bins);
  bins.bin_high.resize(k_bins);
  bins.count.assign(k_bins, 0);
  bins.conf.assign(k_bins, 0.0);
  bins.acc.assign(k_bins, 0.0);
  for (int k = 0; k < k_bins; ++k) {
    bins.bin_low[k] = static_cast<double>(k) / k_bins;
    bins.bin_high[k] = static_cast<double>(k + 1) / k_bins;
  }
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    int k = std::min(k_bins - 1,
                     static_cast<int>(confidences[i] * k_bins));
    bins.count[k] += 1;
    bins.conf[k] += confidences[i];
    bins.acc[k] += correctness[i] ? 1.0 : 0.0;
  }
  for (int k = 0; k < k_bins; ++k) {
    if (bins.count[k] > 0) {
      bins.conf[k] /= bins.count[k];
      bins.acc[k] /= bins.count[k];
    }
  }
  return bins;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int n_classes) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("macro_f1: length mismatch");
  double total = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == c, l = labels[i] == c;
      tp += p && l;
      fp += p && !l;
      fn += !p && l;
    }
    const double prec = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    total += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return total / n_classes;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auc: length mismatch");
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: labels must contain both classes");

  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (int k = 0; k < n; ++k)
    if (labels[k]) rank_sum += rank[k];
  return (rank_sum - 0.5 * n_pos * (n_pos + 1)) / (double(n_pos) * n_neg);
}

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_dataset(const std::string& dir, const TemporalHypergraph& graph,
                   const std::vector<std::pair<int, int>>& truth_edges) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "dataset.csv");
    if (!out) throw std::runtime_error("write_dataset: cannot open dataset.csv");
    out << "# sphunc-dataset v1 n_nodes=" << graph.n_nodes
        << " timesteps=" << graph.timesteps << " feat_dim=" << graph.feat_dim
        << " horizon=" << graph.horizon
        << " target=" << (graph.classification ? "classification" : "regression")
        << " n_classes=" << graph.n_classes << " seed=" << graph.seed << "\n";
    for (int t = 0; t < graph.timesteps; ++t)
      for (int i = 0; i < graph.n_nodes; ++i) {
        out << t << ',' << i;
        for (int f = 0; f < graph.feat_dim; ++f)
          out << ',' << fmt(graph.features[t](f, i));
        out << ',' << (graph.has_target(t, i) ? fmt(graph.targets(t, i)) : "na");
        out << '\n';
      }
  }
  {
    std::ofstream out(fs::path(dir) / "hyperedges.csv");
    if (!out) throw std::runtime_error("write_dataset: cannot open hyperedges.csv");
    out << "# sphunc-hyperedges v1\n";
    for (int t = 0; t < graph.timesteps; ++t)
      for (const auto& e : graph.hyperedges[t]) {
        out << t;
        for (int v : e) out << ',' << v;
        out << '\n';
      }
  }
  if (!truth_edges.empty()) {
    std::vector<EdgeScore> edges;
    for (auto [s, d] : truth_edges) edges.push_back({s, d, 1.0, true});
    write_edges((fs::path(dir) / "truth_edges.csv").string(), edges);
  }
}

TemporalHypergraph read_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "dataset.csv");
  if (!in) throw std::runtime_error("read_dataset: cannot open dataset.csv");
  std::string header;
  std::getline(in, header);
  TemporalHypergraph g;
  auto field = [&](const std::string& key) -> std::string {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos)
      throw std::runtime_error("read_dataset: missing header field " + key);
    const auto start = pos + key.size() + 1;
    const auto end = header.find(' ', start);
    return header.substr(start, end == std::string::npos ? end : end - start);
  };
  g.n_nodes = std::stoi(field("n_nodes"));
  g.timesteps = std::stoi(field("timesteps"));
  g.feat_dim = std::stoi(field("feat_dim"));
  g.horizon = std::stoi(field("horizon"));
  g.classification = field("target") == "classification";
  g.n_classes = std::stoi(field("n_classes"));
  g.seed = std::stoull(field("seed"));

  g.features.assign(g.timesteps, Eigen::MatrixXd::Zero(g.feat_dim, g.n_nodes));
  g.targets = Eigen::MatrixXd::Constant(g.timesteps, g.n_nodes, std::nan(""));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    const int t = std::stoi(tok);
    std::getline(ss, tok, ',');
    const int node = std::stoi(tok);
    for (int f = 0; f < g.feat_dim; ++f) {
      std::getline(ss, tok, ',');
      g.features[t](f, node) = std::stod(tok);
    }
    std::getline(ss, tok, ',');
    if (tok != "na") g.targets(t, node) = std::stod(tok);
  }

  std::ifstream he(fs::path(dir) / "hyperedges.csv");
  if (!he) throw std::runtime_error("read_dataset: cannot open hyperedges.csv");
  g.hyperedges.assign(g.timesteps, {});
  std::getline(he, line);  // header
  while (std::getline(he, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    const int t = std::stoi(tok);
    Hyperedge e;
    while (std::getline(ss, tok, ',')) e.push_back(std::stoi(tok));
    g.hyperedges[t].push_back(std::move(e));
  }
  return g;
}

bool has_truth_edges(const std::string& dir) {
  return fs::exists(fs::path(dir) / "truth_edges.csv");
}

std::vector<std::pair<int, int>> read_truth_edges(const std::string& dir) {
  auto edges = read_edges((fs::path(dir) / "truth_edges.csv").string());
  std::vector<std::pair<int, int>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.emplace_back(e.src, e.dst);
  return out;
}

}  // namespace sphunc
