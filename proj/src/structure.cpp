#include "sphunc/structure.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "sphunc/stats.hpp"

namespace sphunc {

namespace {

struct VarDesign {
  Eigen::MatrixXd X;  // rows x (N * lag * D), lagged coords, plus intercept last
  Eigen::MatrixXd Y;  // rows x (N * D), current coords of every node
  int rows = 0, n = 0, dim = 0, lag = 0;

  int group_start(int src, int l) const { return (src * lag + l) * dim; }
};

VarDesign build_design(const LatentSeries& series, int lag) {
  const int n = static_cast<int>(series.size());
  if (n == 0) throw std::invalid_argument("var: empty series");
  const int T = static_cast<int>(series[0].rows());
  const int dim = static_cast<int>(series[0].cols());
  for (const auto& s : series)
    if (s.rows() != T || s.cols() != dim)
      throw std::invalid_argument("var: ragged latent series");
  if (T < 10 * lag) throw std::invalid_argument("var: series too short");

  VarDesign d;
  d.rows = T - lag;
  d.n = n;
  d.dim = dim;
  d.lag = lag;
  d.X.resize(d.rows, n * lag * dim + 1);
  d.Y.resize(d.rows, n * dim);
  for (int t = lag; t < T; ++t) {
    const int r = t - lag;
    for (int j = 0; j < n; ++j) {
      for (int l = 0; l < lag; ++l)
        d.X.block(r, d.group_start(j, l), 1, dim) = series[j].row(t - 1 - l);
      d.Y.block(r, j * dim, 1, dim) = series[j].row(t);
    }
    d.X(r, n * lag * dim) = 1.0;
  }
  return d;
}

}  // namespace

VarInitResult var_init(const LatentSeries& series, int lag, double alpha) {
  VarDesign d = build_design(series, lag);
  const int n = d.n, dim = d.dim, p = static_cast<int>(d.X.cols());

  Eigen::MatrixXd gram = d.X.transpose() * d.X;
  VarInitResult result;

  // Ridge-stabilize when the design is rank deficient (or under-determined).
  auto ldlt = gram.ldlt();
  const double dmax = ldlt.vectorD().maxCoeff();
  if (d.rows < p || ldlt.vectorD().minCoeff() <= 1e-10 * std::max(dmax, 1.0)) {
    result.rank_deficient = true;
    std::cerr << "var_init: rank-deficient design, applying ridge 1e-6\n";
    gram.diagonal().array() += 1e-6 * std::max(1.0, gram.trace() / p);
    ldlt = gram.ldlt();
  }

  const Eigen::MatrixXd beta = ldlt.solve(d.X.transpose() * d.Y);
  const Eigen::MatrixXd ginv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd resid = d.Y - d.X * beta;

  const int q = lag * dim;  // columns per source group (per response)
  const double dof2 = static_cast<double>(dim) * (d.rows - p);

  std::vector<double> pvals;
  std::vector<EdgeScore> edges;
  for (int src = 0; src < n; ++src) {
    Eigen::MatrixXd sub(q, q);
    for (int a = 0; a < lag; ++a)
      for (int b = 0; b < lag; ++b)
        sub.block(a * dim, b * dim, dim, dim) = ginv.block(
            d.group_start(src, a), d.group_start(src, b), dim, dim);
    const Eigen::MatrixXd sub_inv = sub.ldlt().solve(Eigen::MatrixXd::Identity(q, q));

    for (int dst = 0; dst < n; ++dst) {
      if (dst == src) continue;
      Eigen::MatrixXd block(q, dim);  // group coefficients for dst's responses
      for (int l = 0; l < lag; ++l)
        block.block(l * dim, 0, dim, dim) =
            beta.block(d.group_start(src, l), dst * dim, dim, dim);
      const double rss_full = resid.middleCols(dst * dim, dim).squaredNorm();
      const double delta = (block.transpose() * sub_inv * block).trace();

      EdgeScore e;
      e.src = src;
      e.dst = dst;
      e.score = block.norm();
      double pval = 1.0;
      if (dof2 > 0.0 && rss_full > 0.0) {
        const double f = (delta / (q * dim)) / (rss_full / dof2);
        pval = stats::f_survival(f, q * dim, dof2);
      }
      pvals.push_back(pval);
      edges.push_back(e);
    }
  }

  const auto keep = stats::benjamini_hochberg(pvals, alpha);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i].significant = keep[i];
  result.edges = std::move(edges);
  return result;
}

namespace {

// Elementwise-L1 coordinate descent on standardized columns, Gram form:
// minimize (1/2n)||y - X b||^2 + lambda ||b||_1.
Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& gram_n,  // X'X / n
                         const Eigen::VectorXd& xy_n,    // X'y / n
                         double lambda, double tol, int max_iter) {
  const int p = static_cast<int>(gram_n.rows());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(p);  // gram_n * b
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    for (int j = 0; j < p; ++j) {
      const double gjj = gram_n(j, j);
      if (gjj <= 0.0) continue;
      const double rho = xy_n[j] - gb[j] + gjj * b[j];
      double bj = 0.0;
      if (rho > lambda)
        bj = (rho - lambda) / gjj;
      else if (rho < -lambda)
        bj = (rho + lambda) / gjj;
      const double diff = bj - b[j];
      if (diff != 0.0) {
        gb += diff * gram_n.col(j);
        b[j] = bj;
        delta = std::max(delta, std::abs(diff));
      }
    }
    if (delta < tol) break;
  }
  return b;
}

struct NodeLassoFit {
  std::vector<int> sources;
  std::vector<double> group_norms;
};

NodeLassoFit lasso_fit_node(const VarDesign& d, int dst,
                            const std::vector<int>& sources, double lambda) {
  NodeLassoFit fit;
  fit.sources = sources;
  const int dim = d.dim, lag = d.lag;
  const int pc = static_cast<int>(sources.size()) * lag * dim;
  if (pc == 0) return fit;

  Eigen::MatrixXd X(d.rows, pc);
  int col = 0;
  for (int src : sources)
    for (int l = 0; l < lag; ++l) {
      X.middleCols(col, dim) = d.X.middleCols(d.group_start(src, l), dim);
      col += dim;
    }

  // Center and scale columns; zero-variance columns stay zeroed out.
  Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  Eigen::VectorXd scale(pc);
  for (int j = 0; j < pc; ++j) {
    const double sd = std::sqrt(X.col(j).squaredNorm() / d.rows);
    scale[j] = sd;
    if (sd > 1e-12) X.col(j) /= sd;
  }

  const Eigen::MatrixXd gram_n = X.transpose() * X / double(d.rows);
  fit.group_norms.assign(sources.size(), 0.0);
  for (int c = 0; c < dim; ++c) {
    Eigen::VectorXd y = d.Y.col(dst * dim + c);
    y.array() -= y.mean();
    const Eigen::VectorXd xy_n = X.transpose() * y / double(d.rows);
    const Eigen::VectorXd b = lasso_cd(gram_n, xy_n, lambda, 1e-8, 2000);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const auto seg = b.segment(static_cast<int>(s) * lag * dim, lag * dim);
      fit.group_norms[s] += seg.squaredNorm();
    }
  }
  for (auto& g : fit.group_norms) g = std::sqrt(g);
  return fit;
}

}  // namespace

CandidateStructure lasso_refine(const LatentSeries& series,
                                const std::vector<EdgeScore>& candidates,
                                double lambda, int s, int lag) {
  if (candidates.empty())
    throw std::invalid_argument("lasso_refine: no candidate edges");
  VarDesign d = build_design(series, lag);

  CandidateStructure out;
  out.sparsity_s = s;
  out.parents.assign(d.n, {});
  for (int dst = 0; dst < d.n; ++dst) {
    std::vector<int> sources;
    for (const auto& e : candidates)
      if (e.dst == dst && e.significant && e.src != dst) sources.push_back(e.src);
    if (sources.empty()) continue;
    const NodeLassoFit fit = lasso_fit_node(d, dst, sources, lambda);

    std::vector<int> order(sources.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return fit.group_norms[a] > fit.group_norms[b];
    });
    for (int idx : order) {
      if (static_cast<int>(out.parents[dst].size()) >= s) break;
      if (fit.group_norms[idx] <= 1e-12) break;
      out.parents[dst].push_back(sources[idx]);
    }
    std::sort(out.parents[dst].begin(), out.parents[dst].end());
  }
  return out;
}

double select_lambda(const LatentSeries& series,
                     const std::vector<EdgeScore>& candidates,
                     const std::vector<double>& grid, int s, int lag,
                     int folds) {
  if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
  const int T = static_cast<int>(series[0].rows());
  const int seg = T / (folds + 1);
  if (seg <= 10 * lag) return grid[grid.size() / 2];

  double best_lambda = grid[0];
  double best_err = std::numeric_limits<double>::max();
  for (double lambda : grid) {
    double err = 0.0;
    for (int f = 0; f < folds; ++f) {
      const int t_train = seg * (f + 1);
      const int t_val_end = std::min(T, t_train + seg);
      LatentSeries train, val;
      for (const auto& sN : series) {
        train.push_back(sN.topRows(t_train));
        val.push_back(sN.middleRows(t_train - lag, t_val_end - t_train + lag));
      }
      CandidateStructure st = lasso_refine(train, candidates, lambda, s, lag);
      // Validation error of the per-node least-squares refit on kept parents.
      VarDesign dtr = build_design(train, lag);
      VarDesign dva = build_design(val, lag);
      for (int dst = 0; dst < dtr.n; ++dst) {
        const auto& ps = st.parents[dst];
        Eigen::MatrixXd yv = dva.Y.middleCols(dst * dtr.dim, dtr.dim);
        if (ps.empty()) {
          err += yv.squaredNorm();
          continue;
        }
        const int pc = static_cast<int>(ps.size()) * lag * dtr.dim + 1;
        Eigen::MatrixXd Xt(dtr.rows, pc), Xv(dva.rows, pc);
        int col = 0;
        for (int src : ps)
          for (int l = 0; l < lag; ++l) {
            Xt.middleCols(col, dtr.dim) =
                dtr.X.middleCols(dtr.group_start(src, l), dtr.dim);
            Xv.middleCols(col, dtr.dim) =
                dva.X.middleCols(dva.group_start(src, l), dtr.dim);
            col += dtr.dim;
          }
        Xt.col(pc - 1).setOnes();
        Xv.col(pc - 1).setOnes();
        Eigen::MatrixXd g = Xt.transpose() * Xt;
        g.diagonal().array() += 1e-8 * std::max(1.0, g.trace() / pc);
        const Eigen::MatrixXd bb = g.ldlt().solve(
            Xt.transpose() * dtr.Y.middleCols(dst * dtr.dim, dtr.dim));
        err += (yv - Xv * bb).squaredNorm();
      }
    }
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

GateTable gate_scores(const CandidateStructure& structure,
                      const std::vector<EdgeScore>& edge_scores) {
  auto lookup = [&](int src, int dst) -> double {
    for (const auto& e : edge_scores)
      if (e.src == src && e.dst == dst) return e.score;
    throw std::invalid_argument("gate_scores: structure edge missing a score");
  };
  GateTable gates;
  for (int dst = 0; dst < static_cast<int>(structure.parents.size()); ++dst) {
    const auto& ps = structure.parents[dst];
    if (ps.empty()) continue;
    double top = 0.0;
    for (int src : ps) top = std::max(top, lookup(src, dst));
    for (int src : ps) {
      const double sc = lookup(src, dst);
      gates.set(src, dst, top > 0.0 ? sc / top : 1.0);
    }
  }
  return gates;
}

double precision_at_k(const std::vector<EdgeScore>& predicted,
                      const std::vector<std::pair<int, int>>& truth, int k) {
  if (static_cast<int>(predicted.size()) < k)
    throw std::invalid_argument("precision_at_k: fewer than k predictions");
  std::vector<const EdgeScore*> ranked;
  ranked.reserve(predicted.size());
  for (const auto& e : predicted) ranked.push_back(&e);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const EdgeScore* a, const EdgeScore* b) {
                     return a->score > b->score;
                   });
  int hit = 0;
  for (int i = 0; i < k; ++i) {
    for (const auto& [s, t] : truth) {
      if (ranked[i]->src == s && ranked[i]->dst == t) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / k;
}

void write_edges(const std::string& path, const std::vector<EdgeScore>& edges) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_edges: cannot open " + path);
  out << "src,dst,score,significant\n";
  for (const auto& e : edges)
    out << e.src << ',' << e.dst << ',' << e.score << ','
        << (e.significant ? 1 : 0) << '\n';
}

std::vector<EdgeScore> read_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_edges: cannot open " + path);
  std::vector<EdgeScore> edges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0])))
      continue;
    std::istringstream ss(line);
    EdgeScore e;
    char comma;
    int sig = 0;
    ss >> e.src >> comma >> e.dst >> comma >> e.score >> comma >> sig;
    e.significant = sig != 0;
    edges.push_back(e);
  }
  return edges;
}

}  // namespace sphunc
