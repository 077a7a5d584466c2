#include <doctest.h>

#include <cmath>

#include "sphunc/rng.hpp"
#include "sphunc/stats.hpp"
#include "sphunc/structure.hpp"

using namespace sphunc;

namespace {

// Directed spherical VAR-style process: each node follows its parents'
// previous states plus a persistent anchor and Gaussian tangent noise.
LatentSeries make_series(int n_nodes, int T, int dim, double coupling,
                         const std::vector<std::pair<int, int>>& edges,
                         std::uint64_t seed, double noise = 0.35) {
  auto eng = rng::make_engine(seed);
  std::vector<Eigen::VectorXd> anchor(n_nodes);
  for (auto& a : anchor) a = rng::uniform_sphere(dim, eng);

  LatentSeries series(n_nodes, Eigen::MatrixXd(T, dim));
  std::vector<Eigen::VectorXd> prev(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    prev[i] = rng::uniform_sphere(dim, eng);
    series[i].row(0) = prev[i];
  }
  for (int t = 1; t < T; ++t) {
    std::vector<Eigen::VectorXd> cur(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
      Eigen::VectorXd u = 0.4 * anchor[i] + noise * rng::gaussian_vector(dim, eng);
      for (const auto& [src, dst] : edges)
        if (dst == i) u += coupling * prev[src];
      cur[i] = u.normalized();
      series[i].row(t) = cur[i];
    }
    prev = cur;
  }
  return series;
}

}  // namespace

TEST_CASE("stats kit: incomplete beta, F survival, BH, KS, spearman, line fit") {
  CHECK(stats::reg_inc_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(stats::reg_inc_beta(2.0, 3.0, 0.5) == doctest::Approx(0.6875).epsilon(1e-10));
  CHECK(stats::f_survival(1.0, 7.0, 7.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(stats::f_survival(1e9, 3.0, 20.0) < 1e-10);
  CHECK(stats::f_survival(0.0, 3.0, 20.0) == 1.0);

  auto keep = stats::benjamini_hochberg({1e-8, 0.9, 0.5, 2e-8}, 0.05);
  CHECK(keep[0]);
  CHECK(keep[3]);
  CHECK_FALSE(keep[1]);
  CHECK_FALSE(keep[2]);

  auto eng = rng::make_engine(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(2000), b(2000), c(2000);
  for (int i = 0; i < 2000; ++i) {
    a[i] = g(eng);
    b[i] = g(eng);
    c[i] = g(eng) + 0.6;
  }
  CHECK(stats::ks_two_sample(a, b).p_value > 0.01);
  CHECK(stats::ks_two_sample(a, c).p_value < 1e-3);

  std::vector<double> xs(50), ys(50);
  for (int i = 0; i < 50; ++i) {
    xs[i] = i;
    ys[i] = std::exp(0.1 * i);
  }
  CHECK(stats::spearman(xs, ys) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 6; ++i) pts.emplace_back(i, 3.0 + 2.0 * i);
  auto fit = stats::fit_line(pts);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("var_init: null calibration over seeds") {
  const int n_nodes = 10, T = 500, dim = 4;
  int significant = 0, total = 0;
  for (int seed = 0; seed < 20; ++seed) {
    auto eng = rng::make_engine(900 + seed);
    LatentSeries series(n_nodes, Eigen::MatrixXd(T, dim));
    for (int i = 0; i < n_nodes; ++i)
      for (int t = 0; t < T; ++t) series[i].row(t) = rng::uniform_sphere(dim, eng);
    auto r = var_init(series, 2, 0.01);
    CHECK_FALSE(r.rank_deficient);
    for (const auto& e : r.edges) {
      ++total;
      if (e.significant) ++significant;
    }
  }
  CHECK(static_cast<double>(significant) / total <= 3.0 * 0.01);
}

TEST_CASE("var_init: strong chain edges rank on top") {
  std::vector<std::pair<int, int>> chain = {{0, 1}, {1, 2}};
  auto series = make_series(6, 600, 4, 1.2, chain, 51);
  auto r = var_init(series, 2, 0.01);

  std::vector<EdgeScore> sorted = r.edges;
  std::sort(sorted.begin(), sorted.end(),
            [](const EdgeScore& a, const EdgeScore& b) { return a.score > b.score; });
  auto is_chain = [&](const EdgeScore& e) {
    return (e.src == 0 && e.dst == 1) || (e.src == 1 && e.dst == 2);
  };
  CHECK(is_chain(sorted[0]));
  CHECK(is_chain(sorted[1]));
  CHECK(sorted[0].significant);
  CHECK(sorted[1].significant);
}

TEST_CASE("var_init: constant series hits the rank-deficiency path") {
  const int n_nodes = 3, T = 80, dim = 3;
  LatentSeries series(n_nodes, Eigen::MatrixXd(T, dim));
  Eigen::RowVector3d fixed(1.0, 0.0, 0.0);
  for (int i = 0; i < n_nodes; ++i)
    for (int t = 0; t < T; ++t) series[i].row(t) = fixed;
  auto r = var_init(series, 2, 0.01);
  CHECK(r.rank_deficient);
  CHECK_THROWS_AS(var_init(LatentSeries(2, Eigen::MatrixXd(10, 3)), 2, 0.01),
                  std::invalid_argument);
}

TEST_CASE("lasso_refine: shrinkage limits and support recovery") {
  std::vector<std::pair<int, int>> truth = {{0, 1}, {1, 2}, {3, 4}};
  auto series = make_series(5, 600, 4, 1.2, truth, 77);
  auto r = var_init(series, 2, 0.01);

  auto heavy = lasso_refine(series, r.edges, 1e6, 4, 2);
  for (const auto& ps : heavy.parents) CHECK(ps.empty());

  auto ls = lasso_refine(series, r.edges, 0.0, 4, 2);
  for (int dst = 0; dst < 5; ++dst) {
    std::vector<int> expect;
    for (const auto& e : r.edges)
      if (e.dst == dst && e.significant) expect.push_back(e.src);
    std::sort(expect.begin(), expect.end());
    CHECK(ls.parents[dst] == expect);
  }

  auto refined = lasso_refine(series, r.edges, 0.02, 2, 2);
  for (const auto& ps : refined.parents) CHECK(ps.size() <= 2);
  auto has_parent = [&](int dst, int src) {
    const auto& ps = refined.parents[dst];
    return std::find(ps.begin(), ps.end(), src) != ps.end();
  };
  CHECK(has_parent(1, 0));
  CHECK(has_parent(2, 1));
  CHECK(has_parent(4, 3));
}

TEST_CASE("score rank is monotone in coupling strength") {
  std::vector<std::pair<int, int>> edge = {{0, 1}};
  std::vector<int> ranks;
  for (double coupling : {0.3, 0.7, 1.4}) {
    auto series = make_series(5, 500, 4, coupling, edge, 13);
    auto r = var_init(series, 2, 0.01);
    std::vector<EdgeScore> sorted = r.edges;
    std::sort(sorted.begin(), sorted.end(),
              [](const EdgeScore& a, const EdgeScore& b) { return a.score > b.score; });
    int rank = 0;
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i)
      if (sorted[i].src == 0 && sorted[i].dst == 1) rank = i;
    ranks.push_back(rank);
  }
  CHECK(ranks[1] <= ranks[0]);
  CHECK(ranks[2] <= ranks[1]);
  CHECK(ranks[2] == 0);
}

TEST_CASE("gate scores normalize by the strongest parent") {
  CandidateStructure st;
  st.parents = {{}, {0}, {0, 1}, {0, 1}};
  st.sparsity_s = 2;
  std::vector<EdgeScore> scores = {{0, 1, 3.5, true}, {0, 2, 2.0, true},
                                   {1, 2, 1.0, true}, {0, 3, 0.7, true},
                                   {1, 3, 0.7, true}};
  auto gates = gate_scores(st, scores);
  CHECK(gates.get(0, 1) == doctest::Approx(1.0));
  CHECK(gates.get(0, 2) == doctest::Approx(1.0));
  CHECK(gates.get(1, 2) == doctest::Approx(0.5));
  CHECK(gates.get(0, 3) == doctest::Approx(1.0));
  CHECK(gates.get(1, 3) == doctest::Approx(1.0));
}

TEST_CASE("precision@k arithmetic, null expectation and tail invariance") {
  std::vector<EdgeScore> pred;
  for (int i = 0; i < 20; ++i) pred.push_back({i, i + 1, 20.0 - i, true});
  std::vector<std::pair<int, int>> truth;
  for (int i = 0; i < 10; ++i) truth.emplace_back(i, i + 1);
  CHECK(precision_at_k(pred, truth, 10) == doctest::Approx(1.0));

  std::vector<std::pair<int, int>> truth7;
  for (int i = 0; i < 7; ++i) truth7.emplace_back(i, i + 1);
  CHECK(precision_at_k(pred, truth7, 10) == doctest::Approx(0.7));

  CHECK_THROWS_AS(precision_at_k({{0, 1, 1.0, true}}, truth, 10),
                  std::invalid_argument);

  // Permuting scores below rank k leaves P@k unchanged.
  auto shuffled = pred;
  std::swap(shuffled[12].score, shuffled[18].score);
  CHECK(precision_at_k(shuffled, truth7, 10) == doctest::Approx(0.7));

  // Random ranking baseline: E[P@10] = 30/870.
  auto eng = rng::make_engine(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = 0.0;
  const int n_seeds = 100;
  for (int s = 0; s < n_seeds; ++s) {
    std::vector<EdgeScore> all;
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j)
        if (i != j) all.push_back({i, j, u(eng), false});
    std::vector<std::pair<int, int>> t30;
    while (t30.size() < 30) {
      int i = static_cast<int>(u(eng) * 30), j = static_cast<int>(u(eng) * 30);
      if (i == j) continue;
      if (std::find(t30.begin(), t30.end(), std::make_pair(i, j)) == t30.end())
        t30.emplace_back(i, j);
    }
    total += precision_at_k(all, t30, 10);
  }
  CHECK(std::abs(total / n_seeds - 30.0 / 870.0) <= 0.02);
}

TEST_CASE("edge list round trip") {
  std::vector<EdgeScore> edges = {{0, 1, 1.25, true}, {4, 2, 0.5, false}};
  const std::string path = "/tmp/sphunc_edges_test.csv";
  write_edges(path, edges);
  auto back = read_edges(path);
  REQUIRE(back.size() == edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    CHECK(back[i].src == edges[i].src);
    CHECK(back[i].dst == edges[i].dst);
    CHECK(back[i].score == doctest::Approx(edges[i].score));
    CHECK(back[i].significant == edges[i].significant);
  }
}

TEST_CASE("lasso with forward-chaining lambda recovers the exact support") {
  int exact = 0;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    std::vector<std::pair<int, int>> truth = {{0, 2}, {1, 2}, {3, 4}, {0, 5}};
    auto series = make_series(6, 2000, 4, 1.3, truth, 400 + s);
    auto vr = var_init(series, 2, 0.01);
    const double lambda =
        select_lambda(series, vr.edges, {5e-4, 2e-3, 8e-3, 3e-2}, 2, 2, 5);
    auto st = lasso_refine(series, vr.edges, lambda, 2, 2);
    std::vector<std::vector<int>> want(6);
    for (auto [src, dst] : truth) want[dst].push_back(src);
    for (auto& w : want) std::sort(w.begin(), w.end());
    exact += (st.parents == want) ? 1 : 0;
  }
  CHECK(exact >= 8);
}

TEST_CASE("contemporaneous copies never produce a lagged edge") {
  // node1 mirrors node0 within the same step; zero lagged predictability.
  auto eng = rng::make_engine(61);
  const int T = 400, dim = 4;
  LatentSeries series(3, Eigen::MatrixXd(T, dim));
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd h = rng::uniform_sphere(dim, eng);
    series[0].row(t) = h;
    series[1].row(t) = h;
    series[2].row(t) = rng::uniform_sphere(dim, eng);
  }
  auto r = var_init(series, 2, 0.01);
  for (const auto& e : r.edges) CHECK_FALSE(e.significant);
}
