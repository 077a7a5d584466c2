#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sphunc/data.hpp"
#include "sphunc/stats.hpp"
#include "sphunc/structure.hpp"

using namespace sphunc;

TEST_CASE("gen_synthetic: determinism, null coupling, noise variance") {
  SyntheticSpec spec;
  spec.n_nodes = 8;
  spec.timesteps = 120;
  spec.feat_dim = 10;
  spec.latent_dim = 6;
  spec.seed = 5;

  auto a = gen_synthetic(spec);
  auto b = gen_synthetic(spec);
  CHECK(a.true_edges == b.true_edges);
  for (int t = 0; t < spec.timesteps; ++t) {
    CHECK((a.graph.features[t] - b.graph.features[t]).norm() == 0.0);
    CHECK(a.graph.hyperedges[t] == b.graph.hyperedges[t]);
    CHECK((a.latents[t] - b.latents[t]).norm() == 0.0);
  }
  CHECK(((a.graph.targets.array() == b.graph.targets.array()) ||
         (a.graph.targets.array().isNaN() && b.graph.targets.array().isNaN()))
            .all());

  // Null coupling: significance rate on the true latents stays near alpha.
  int significant = 0, total = 0;
  for (int seed = 0; seed < 5; ++seed) {
    SyntheticSpec null_spec;
    null_spec.n_nodes = 8;
    null_spec.timesteps = 400;
    null_spec.feat_dim = 8;
    null_spec.latent_dim = 4;
    null_spec.coupling = 0.0;
    null_spec.noise_kappa = 8.0;
    null_spec.seed = 100 + seed;
    auto nd = gen_synthetic(null_spec);
    LatentSeries series(null_spec.n_nodes,
                        Eigen::MatrixXd(null_spec.timesteps, null_spec.latent_dim));
    for (int t = 0; t < null_spec.timesteps; ++t)
      for (int i = 0; i < null_spec.n_nodes; ++i)
        series[i].row(t) = nd.latents[t].col(i).transpose();
    auto r = var_init(series, 2, 0.01);
    for (const auto& e : r.edges) {
      ++total;
      if (e.significant) ++significant;
    }
  }
  CHECK(static_cast<double>(significant) / total <= 3.0 * 0.01);

  // Constant aleatoric law: Var(y - m(x)) within 5% of the constant.
  SyntheticSpec cs;
  cs.n_nodes = 25;
  cs.timesteps = 420;
  cs.feat_dim = 8;
  cs.latent_dim = 6;
  cs.alea_base = 0.25;
  cs.alea_scale = 0.0;
  cs.seed = 17;
  auto cd = gen_synthetic(cs);
  std::vector<double> resid;
  for (int t = 0; t < cs.timesteps; ++t)
    for (int i = 0; i < cs.n_nodes; ++i)
      if (cd.graph.has_target(t, i))
        resid.push_back(cd.graph.targets(t, i) - cd.target_c -
                        cd.target_w.dot(cd.graph.features[t].col(i)));
  CHECK(resid.size() >= 10000);
  CHECK(std::abs(stats::variance(resid) - 0.25) <= 0.05 * 0.25);
}

TEST_CASE("gen_synthetic: aleatoric noise is orthogonal to angular dispersion") {
  SyntheticSpec spec;
  spec.n_nodes = 20;
  spec.timesteps = 520;
  spec.feat_dim = 10;
  spec.latent_dim = 6;
  spec.noise_kappa = 12.0;
  spec.seed = 23;
  auto d = gen_synthetic(spec);

  std::vector<double> sq_resid, dispersion;
  for (int t = 1; t < spec.timesteps; ++t) {
    const Eigen::MatrixXd dir =
        structural_direction(d.truth, d.latents[t - 1], {});
    for (int i = 0; i < spec.n_nodes; ++i) {
      if (!d.graph.has_target(t, i)) continue;
      const double r = d.graph.targets(t, i) - d.target_c -
                       d.target_w.dot(d.graph.features[t].col(i));
      sq_resid.push_back(r * r);
      dispersion.push_back(1.0 - dir.col(i).dot(d.latents[t].col(i)));
    }
  }
  CHECK(sq_resid.size() >= 10000);
  const double n = static_cast<double>(sq_resid.size());
  const double ma = stats::mean(sq_resid), mb = stats::mean(dispersion);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < sq_resid.size(); ++i) {
    sab += (sq_resid[i] - ma) * (dispersion[i] - mb);
    saa += (sq_resid[i] - ma) * (sq_resid[i] - ma);
    sbb += (dispersion[i] - mb) * (dispersion[i] - mb);
  }
  CHECK(std::abs(sab / std::sqrt(saa * sbb)) <= 0.05);
  (void)n;
}

TEST_CASE("gen_synthetic: hyperedge shape invariants") {
  SyntheticSpec spec;
  spec.n_nodes = 12;
  spec.timesteps = 40;
  spec.feat_dim = 6;
  spec.latent_dim = 4;
  spec.seed = 31;
  auto d = gen_synthetic(spec);
  for (int t = 0; t < spec.timesteps; ++t) {
    CHECK(!d.graph.hyperedges[t].empty());
    for (const auto& e : d.graph.hyperedges[t]) {
      CHECK(e.size() >= 2);
      CHECK(e.size() <= 5);
      for (int v : e) {
        CHECK(v >= 0);
        CHECK(v < spec.n_nodes);
      }
    }
  }
  CHECK_THROWS_AS(gen_synthetic(SyntheticSpec{.n_nodes = 1}),
                  std::invalid_argument);
}

TEST_CASE("ece: oracle zero, hand-computed case, calibrated simulator") {
  // Bin-wise calibrated oracle: conf 0.75 with exactly 3 of 4 correct.
  std::vector<double> conf;
  std::vector<int> correct;
  for (int rep = 0; rep < 25; ++rep) {
    for (int k = 0; k < 4; ++k) {
      conf.push_back(0.75);
      correct.push_back(k < 3 ? 1 : 0);
    }
  }
  CHECK(ece(conf, correct) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<double> c2;
  std::vector<int> k2;
  for (int i = 0; i < 10; ++i) {
    c2.push_back(0.9);
    k2.push_back(i < 8 ? 1 : 0);
  }
  for (int i = 0; i < 10; ++i) {
    c2.push_back(0.6);
    k2.push_back(i < 6 ? 1 : 0);
  }
  CHECK(ece(c2, k2) == doctest::Approx(0.05).epsilon(1e-12));

  // Permutation invariance.
  std::vector<double> c3 = c2;
  std::vector<int> k3 = k2;
  std::reverse(c3.begin(), c3.end());
  std::reverse(k3.begin(), k3.end());
  CHECK(ece(c3, k3) == doctest::Approx(ece(c2, k2)).epsilon(1e-12));

  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cc;
  std::vector<int> kk;
  for (int i = 0; i < 10000; ++i) {
    const double p = (i % 2 == 0) ? 0.6 : 0.9;
    cc.push_back(p);
    kk.push_back(u(eng) < p ? 1 : 0);
  }
  CHECK(ece(cc, kk) <= 0.02);

  CHECK_THROWS_AS(ece({0.5}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(ece({1.5}, {1}), std::invalid_argument);
}

TEST_CASE("reliability bins") {
  auto top = reliability_bins(std::vector<double>(20, 1.0),
                              std::vector<int>(20, 1), 15);
  int occupied = 0;
  for (int k = 0; k < top.k_bins; ++k)
    if (top.count[k] > 0) {
      ++occupied;
      CHECK(top.acc[k] == doctest::Approx(1.0));
      CHECK(top.conf[k] == doctest::Approx(1.0));
      CHECK(k == top.k_bins - 1);
    }
  CHECK(occupied == 1);

  // Constant +0.1 confidence excess in every occupied bin.
  std::vector<double> conf;
  std::vector<int> correct;
  for (double base : {0.3, 0.5, 0.9}) {
    for (int i = 0; i < 10; ++i) {
      conf.push_back(base);
      correct.push_back(i < static_cast<int>((base - 0.1) * 10 + 0.5) ? 1 : 0);
    }
  }
  auto bins = reliability_bins(conf, correct, 10);
  for (int k = 0; k < bins.k_bins; ++k)
    if (bins.count[k] > 0)
      CHECK(bins.conf[k] - bins.acc[k] == doctest::Approx(0.1).epsilon(1e-9));

  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cc;
  std::vector<int> kk;
  for (int i = 0; i < 10000; ++i) {
    const double p = 0.05 + 0.9 * u(eng);
    cc.push_back(p);
    kk.push_back(u(eng) < p ? 1 : 0);
  }
  auto sim = reliability_bins(cc, kk, 15);
  for (int k = 0; k < sim.k_bins; ++k)
    if (sim.count[k] > 50) CHECK(std::abs(sim.acc[k] - sim.conf[k]) <= 0.05);
}

TEST_CASE("macro F1 and AUC") {
  std::vector<int> perfect = {0, 1, 2, 0, 1, 2};
  CHECK(macro_f1(perfect, perfect, 3) == doctest::Approx(1.0));

  // Symmetric 2-class confusion: TP=8, FP=2, FN=2, TN=8 per class.
  std::vector<int> labels, preds;
  for (int i = 0; i < 8; ++i) { labels.push_back(0); preds.push_back(0); }
  for (int i = 0; i < 2; ++i) { labels.push_back(0); preds.push_back(1); }
  for (int i = 0; i < 2; ++i) { labels.push_back(1); preds.push_back(0); }
  for (int i = 0; i < 8; ++i) { labels.push_back(1); preds.push_back(1); }
  CHECK(macro_f1(preds, labels, 2) == doctest::Approx(0.8).epsilon(1e-12));

  std::vector<double> s_perfect = {0.1, 0.9, 0.2, 0.8};
  std::vector<int> l_perfect = {0, 1, 0, 1};
  CHECK(auc(s_perfect, l_perfect) == doctest::Approx(1.0));

  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s_null(10000);
  std::vector<int> l_null(10000);
  for (int i = 0; i < 10000; ++i) {
    s_null[i] = u(eng);
    l_null[i] = u(eng) < 0.4 ? 1 : 0;
  }
  CHECK(std::abs(auc(s_null, l_null) - 0.5) <= 0.02);

  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("dataset serialization round trip") {
  SyntheticSpec spec;
  spec.n_nodes = 6;
  spec.timesteps = 30;
  spec.feat_dim = 5;
  spec.latent_dim = 4;
  spec.target_mode = TargetMode::kForecast;
  spec.horizon = 2;
  spec.seed = 77;
  auto d = gen_synthetic(spec);

  const std::string dir = "/tmp/sphunc_dataset_test";
  std::filesystem::remove_all(dir);
  write_dataset(dir, d.graph, d.true_edges);
  auto back = read_dataset(dir);

  CHECK(back.n_nodes == d.graph.n_nodes);
  CHECK(back.timesteps == d.graph.timesteps);
  CHECK(back.feat_dim == d.graph.feat_dim);
  CHECK(back.horizon == d.graph.horizon);
  CHECK(back.classification == d.graph.classification);
  CHECK(back.seed == d.graph.seed);
  for (int t = 0; t < spec.timesteps; ++t) {
    CHECK((back.features[t] - d.graph.features[t]).norm() == 0.0);
    CHECK(back.hyperedges[t] == d.graph.hyperedges[t]);
    for (int i = 0; i < spec.n_nodes; ++i) {
      CHECK(back.has_target(t, i) == d.graph.has_target(t, i));
      if (back.has_target(t, i))
        CHECK(back.targets(t, i) == d.graph.targets(t, i));
    }
  }
  CHECK(has_truth_edges(dir));
  CHECK(read_truth_edges(dir) == d.true_edges);

  // Classification targets survive the round trip as exact labels.
  SyntheticSpec cs = spec;
  cs.classification = true;
  cs.n_classes = 3;
  cs.target_mode = TargetMode::kDirect;
  auto cdata = gen_synthetic(cs);
  const std::string cdir = "/tmp/sphunc_dataset_test_cls";
  std::filesystem::remove_all(cdir);
  write_dataset(cdir, cdata.graph);
  auto cback = read_dataset(cdir);
  CHECK(cback.classification);
  CHECK(cback.n_classes == 3);
  CHECK((cback.targets.array() == cdata.graph.targets.array()).any());
}
