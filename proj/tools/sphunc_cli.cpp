// Command-line surface: dataset generation, training, evaluation and
// interventional analysis. Exit codes: 0 success, 1 runtime failure, 2
// configuration error.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "sphunc/bench.hpp"
#include "sphunc/rng.hpp"
#include "sphunc/checkpoint.hpp"
#include "sphunc/data.hpp"
#include "sphunc/scm.hpp"
#include "sphunc/stats.hpp"
#include "sphunc/structure.hpp"
#include "sphunc/training.hpp"
#include "sphunc/vmf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sphunc;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(cfg, {"schema_version", "synthetic", "train", "loss",
                   "intervention"},
             "");
  if (!cfg.contains("schema_version") || cfg["schema_version"] != 1)
    throw ConfigError("config must declare schema_version: 1");
  return cfg;
}

SyntheticSpec parse_synthetic(const json& cfg) {
  SyntheticSpec spec;
  if (!cfg.contains("synthetic")) return spec;
  const json& s = cfg["synthetic"];
  check_keys(s,
             {"n_nodes", "timesteps", "feat_dim", "latent_dim", "sparsity",
              "coupling", "noise_kappa", "exo_strength", "obs_noise",
              "hyperedge_rate", "horizon", "target_mode", "classification",
              "n_classes", "alea_base", "alea_scale", "seed"},
             "synthetic.");
  spec.n_nodes = s.value("n_nodes", spec.n_nodes);
  spec.timesteps = s.value("timesteps", spec.timesteps);
  spec.feat_dim = s.value("feat_dim", spec.feat_dim);
  spec.latent_dim = s.value("latent_dim", spec.latent_dim);
  spec.sparsity = s.value("sparsity", spec.sparsity);
  spec.coupling = s.value("coupling", spec.coupling);
  spec.noise_kappa = s.value("noise_kappa", spec.noise_kappa);
  spec.exo_strength = s.value("exo_strength", spec.exo_strength);
  spec.obs_noise = s.value("obs_noise", spec.obs_noise);
  spec.hyperedge_rate = s.value("hyperedge_rate", spec.hyperedge_rate);
  spec.horizon = s.value("horizon", spec.horizon);
  if (s.contains("target_mode")) {
    const std::string mode = s["target_mode"];
    if (mode == "direct")
      spec.target_mode = TargetMode::kDirect;
    else if (mode == "forecast")
      spec.target_mode = TargetMode::kForecast;
    else
      throw ConfigError("synthetic.target_mode must be direct or forecast");
  }
  spec.classification = s.value("classification", spec.classification);
  spec.n_classes = s.value("n_classes", spec.n_classes);
  spec.alea_base = s.value("alea_base", spec.alea_base);
  spec.alea_scale = s.value("alea_scale", spec.alea_scale);
  spec.seed = s.value("seed", spec.seed);
  return spec;
}

TrainConfig parse_train(const json& cfg) {
  TrainConfig t;
  if (!cfg.contains("train")) return t;
  const json& s = cfg["train"];
  check_keys(s,
             {"lr", "batch", "epochs", "weight_decay", "dropout", "mp_layers",
              "d_sphere", "mc_samples", "structure_epochs", "sparsity_s",
              "kappa_hidden", "alea_hidden", "fusion_hidden", "proxy_window",
              "learn_structure", "gates_trainable"},
             "train.");
  t.lr = s.value("lr", t.lr);
  t.batch = s.value("batch", t.batch);
  t.epochs = s.value("epochs", t.epochs);
  t.weight_decay = s.value("weight_decay", t.weight_decay);
  t.dropout = s.value("dropout", t.dropout);
  t.mp_layers = s.value("mp_layers", t.mp_layers);
  t.d_sphere = s.value("d_sphere", t.d_sphere);
  t.mc_samples = s.value("mc_samples", t.mc_samples);
  t.structure_epochs = s.value("structure_epochs", t.structure_epochs);
  t.sparsity_s = s.value("sparsity_s", t.sparsity_s);
  t.kappa_hidden = s.value("kappa_hidden", t.kappa_hidden);
  t.alea_hidden = s.value("alea_hidden", t.alea_hidden);
  t.fusion_hidden = s.value("fusion_hidden", t.fusion_hidden);
  t.proxy_window = s.value("proxy_window", t.proxy_window);
  t.learn_structure = s.value("learn_structure", t.learn_structure);
  t.gates_trainable = s.value("gates_trainable", t.gates_trainable);
  if (t.lr <= 0.0 || t.batch < 1 || t.epochs < 0)
    throw ConfigError("train: lr, batch, epochs must be positive");
  return t;
}

LossWeights parse_loss(const json& cfg) {
  LossWeights w;
  if (!cfg.contains("loss")) return w;
  const json& s = cfg["loss"];
  check_keys(s, {"lambda1", "lambda2"}, "loss.");
  w.lambda1 = s.value("lambda1", w.lambda1);
  w.lambda2 = s.value("lambda2", w.lambda2);
  if (w.lambda1 < 0.0 || w.lambda2 < 0.0)
    throw ConfigError("loss: lambda1, lambda2 must be non-negative");
  return w;
}

struct InterventionConfig {
  std::vector<std::pair<int, json>> targets;  // node -> direction spec
  int start_t = 1;
  int horizon = 10;
  int samples = 100;  // Table-default Monte Carlo budget
  bool pulse = false;
  int readout_node = -1;  // -1: last node
  std::string estimator = "gaussian";
};

InterventionConfig parse_intervention(const json& cfg) {
  InterventionConfig ic;
  if (!cfg.contains("intervention")) return ic;
  const json& s = cfg["intervention"];
  check_keys(s,
             {"targets", "start_t", "horizon", "samples", "pulse",
              "readout_node", "estimator"},
             "intervention.");
  if (s.contains("targets")) {
    for (const auto& t : s["targets"]) {
      check_keys(t, {"node", "direction", "axis"}, "intervention.targets.");
      if (!t.contains("node"))
        throw ConfigError("intervention target needs a node id");
      ic.targets.emplace_back(t["node"].get<int>(), t);
    }
  }
  ic.start_t = s.value("start_t", ic.start_t);
  ic.horizon = s.value("horizon", ic.horizon);
  ic.samples = s.value("samples", ic.samples);
  ic.pulse = s.value("pulse", ic.pulse);
  ic.readout_node = s.value("readout_node", ic.readout_node);
  ic.estimator = s.value("estimator", ic.estimator);
  if (ic.estimator != "gaussian" && ic.estimator != "histogram")
    throw ConfigError("intervention.estimator must be gaussian or histogram");
  return ic;
}

void write_meta(const std::string& out_dir, const std::string& command) {
  // The only output that carries a timestamp; everything else is
  // deterministic given the seed.
  json meta;
  meta["command"] = command;
  meta["schema_version"] = 1;
  meta["timestamp"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::ofstream out(fs::path(out_dir) / "run_meta.json");
  out << meta.dump(2) << "\n";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            long long seed_override) {
  json cfg = load_config(config_path);
  SyntheticSpec spec = parse_synthetic(cfg);
  if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
  SyntheticData data = gen_synthetic(spec);
  write_dataset(out_dir, data.graph, data.true_edges);
  write_meta(out_dir, "gen");
  std::cout << "wrote dataset: n_nodes=" << spec.n_nodes
            << " timesteps=" << spec.timesteps << " feat_dim=" << spec.feat_dim
            << " true_edges=" << data.true_edges.size() << " -> " << out_dir
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, long long seed_override,
              const std::string& resume_path) {
  json cfg = load_config(config_path);
  TrainConfig tc = parse_train(cfg);
  LossWeights weights = parse_loss(cfg);
  TemporalHypergraph data = read_dataset(data_dir);
  const std::uint64_t seed =
      seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : 1;

  TrainResult result;
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    result = train(tc, data, weights, seed, &ckpt.params);
  } else {
    result = train(tc, data, weights, seed);
  }

  fs::create_directories(out_dir);
  save_checkpoint((fs::path(out_dir) / "checkpoint.txt").string(),
                  result.params, seed);
  {
    std::ofstream out(fs::path(out_dir) / "trace.csv");
    out << "epoch,total,pred,entropy,causal\n";
    for (std::size_t e = 0; e < result.trace.size(); ++e)
      out << (e + 1) << ',' << fmt(result.trace[e].total) << ','
          << fmt(result.trace[e].pred) << ',' << fmt(result.trace[e].entropy)
          << ',' << fmt(result.trace[e].causal) << '\n';
  }
  {
    std::ofstream out(fs::path(out_dir) / "uncertainty.csv");
    out << "t,node,u_epi,u_alea,u_total,u_emp\n";
    for (const auto& row : result.uncertainty)
      out << row.t << ',' << row.node << ',' << fmt(row.report.u_epi) << ','
          << fmt(row.report.u_alea) << ',' << fmt(row.report.u_total) << ','
          << fmt(row.report.u_emp.value_or(std::nan(""))) << '\n';
  }
  if (!result.edge_scores.empty())
    write_edges((fs::path(out_dir) / "edges.csv").string(), result.edge_scores);
  write_meta(out_dir, "train");
  std::cout << "trained " << result.trace.size() << " epochs";
  if (!result.trace.empty())
    std::cout << ", final loss " << result.trace.back().total;
  std::cout << " -> " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_dir, bool kappa_hist, bool dropout_sweep) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TemporalHypergraph data = read_dataset(data_dir);
  fs::create_directories(out_dir);

  std::ofstream report(fs::path(out_dir) / "metrics.txt");
  auto emit = [&](const std::string& key, double value) {
    report << key << '=' << fmt(value) << '\n';
    std::cout << key << '=' << value << '\n';
  };

  const auto preds = predict(ckpt.params, data);
  if (data.classification) {
    std::vector<int> yhat, y;
    std::vector<double> conf, score1;
    std::vector<int> correct;
    for (const auto& p : preds) {
      int arg = 0;
      p.output.maxCoeff(&arg);
      yhat.push_back(arg);
      y.push_back(static_cast<int>(p.target));
      conf.push_back(p.output[arg]);
      correct.push_back(arg == static_cast<int>(p.target) ? 1 : 0);
      if (data.n_classes == 2) score1.push_back(p.output[1]);
    }
    emit("macro_f1", macro_f1(yhat, y, data.n_classes));
    if (data.n_classes == 2) emit("auc", auc(score1, y));
    emit("ece", ece(conf, correct, 15));

    const auto bins = reliability_bins(conf, correct, 15);
    std::ofstream rel(fs::path(out_dir) / "reliability.csv");
    rel << "bin_low,bin_high,count,conf,acc\n";
    for (int k = 0; k < bins.k_bins; ++k)
      rel << fmt(bins.bin_low[k]) << ',' << fmt(bins.bin_high[k]) << ','
          << bins.count[k] << ',' << fmt(bins.conf[k]) << ','
          << fmt(bins.acc[k]) << '\n';
  } else {
    double mse = 0.0;
    for (const auto& p : preds) {
      const double r = p.output[0] - p.target;
      mse += r * r;
    }
    emit("mse", mse / preds.size());
    const auto rows = evaluate_uncertainty(ckpt.params, data);
    std::vector<double> ut, ue;
    for (const auto& r : rows) {
      ut.push_back(r.report.u_total);
      ue.push_back(*r.report.u_emp);
    }
    emit("calibration_loss", calibration_loss(ut, ue));
  }

  // Structure ranking against ground truth when the dataset carries it.
  if (has_truth_edges(data_dir)) {
    const LatentSeries series = encode_series(ckpt.params, data);
    const VarInitResult vr = var_init(series, 2, 0.01);
    const auto truth = read_truth_edges(data_dir);
    if (static_cast<int>(vr.edges.size()) >= 10)
      emit("precision_at_10", precision_at_k(vr.edges, truth, 10));
  }

  if (kappa_hist) {
    const int bins = 20;
    const double lo = ckpt.params.kappa_head.kappa_min;
    const double hi = ckpt.params.kappa_head.kappa_max;
    std::vector<int> counts(bins, 0);
    const LatentSeries series = encode_series(ckpt.params, data);
    for (int i = 0; i < data.n_nodes; ++i)
      for (int t = 0; t < data.timesteps; ++t) {
        const double kap = ckpt.params.kappa_head(series[i].row(t).transpose());
        int b = std::min(bins - 1, static_cast<int>((kap - lo) / (hi - lo) * bins));
        counts[std::max(0, b)]++;
      }
    std::ofstream out(fs::path(out_dir) / "kappa_hist.csv");
    out << "bin_low,bin_high,count\n";
    for (int b = 0; b < bins; ++b)
      out << fmt(lo + (hi - lo) * b / bins) << ','
          << fmt(lo + (hi - lo) * (b + 1) / bins) << ',' << counts[b] << '\n';
  }

  if (dropout_sweep) {
    std::ofstream out(fs::path(out_dir) / "dropout_sweep.csv");
    out << "# ci95 = 1.96 * se over mask seeds\n";
    out << "rate,metric,ci95\n";
    for (double rate : {0.0, 0.2, 0.4, 0.6}) {
      std::vector<double> vals;
      for (int mask_seed = 0; mask_seed < 5; ++mask_seed) {
        TemporalHypergraph corrupted = data;
        auto eng = rng::make_engine(rng::derive(900, mask_seed));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& feat : corrupted.features)
          for (int j = 0; j < feat.cols(); ++j)
            for (int i = 0; i < feat.rows(); ++i)
              if (u(eng) < rate) feat(i, j) = 0.0;
        const auto p2 = predict(ckpt.params, corrupted);
        if (data.classification) {
          std::vector<int> yh, yy;
          for (const auto& p : p2) {
            int arg = 0;
            p.output.maxCoeff(&arg);
            yh.push_back(arg);
            yy.push_back(static_cast<int>(p.target));
          }
          vals.push_back(macro_f1(yh, yy, data.n_classes));
        } else {
          double mse = 0.0;
          for (const auto& p : p2) mse += std::pow(p.output[0] - p.target, 2.0);
          vals.push_back(mse / p2.size());
        }
        if (rate == 0.0) break;  // masks identical at rate 0
      }
      const double m = stats::mean(vals);
      const double ci =
          vals.size() > 1
              ? 1.96 * std::sqrt(stats::variance(vals) / vals.size())
              : 0.0;
      out << fmt(rate) << ',' << fmt(m) << ',' << fmt(ci) << '\n';
    }
  }

  write_meta(out_dir, "eval");
  return 0;
}

int cmd_intervene(const std::string& ckpt_path, const std::string& data_dir,
                  const std::string& out_dir, const std::string& config_path,
                  long long samples_override, long long horizon_override,
                  long long seed_override, bool strength_sweep,
                  bool posterior_mixture) {
  InterventionConfig ic;
  if (!config_path.empty()) ic = parse_intervention(load_config(config_path));
  if (samples_override > 0) ic.samples = static_cast<int>(samples_override);
  if (horizon_override > 0) ic.horizon = static_cast<int>(horizon_override);
  const std::uint64_t seed =
      seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : 1;

  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TemporalHypergraph data = read_dataset(data_dir);
  fs::create_directories(out_dir);

  // Structural model refit on the encoded latents with the learned parents.
  const LatentSeries series = encode_series(ckpt.params, data);
  std::vector<std::vector<int>> parents = ckpt.params.parents;
  if (parents.empty()) parents.assign(data.n_nodes, {});
  ScmModel scm = fit_scm(series, parents);
  const int readout_node =
      ic.readout_node >= 0 ? ic.readout_node : data.n_nodes - 1;
  if (readout_node >= data.n_nodes)
    throw ConfigError("intervention.readout_node out of range");
  scm.readout_nodes = {readout_node};
  scm.readout_w = {ckpt.params.readout_W.row(0).transpose()};
  scm.readout_bias = ckpt.params.readout_b[0];

  const int D = ckpt.params.latent_dim();
  Eigen::MatrixXd init(D, data.n_nodes);
  for (int i = 0; i < data.n_nodes; ++i)
    init.col(i) = series[i].row(data.timesteps - 1).transpose();

  InterventionSpec spec;
  spec.start_t = ic.start_t;
  spec.horizon = ic.horizon;
  spec.n_samples = ic.samples;
  spec.pulse = ic.pulse;
  if (ic.targets.empty()) {
    spec.targets[0] = Eigen::VectorXd::Unit(D, 0);
  } else {
    for (const auto& [node, t] : ic.targets) {
      if (node < 0 || node >= data.n_nodes)
        throw ConfigError("intervention target node out of range");
      Eigen::VectorXd dir;
      if (t.contains("direction")) {
        const auto vec = t["direction"].get<std::vector<double>>();
        if (static_cast<int>(vec.size()) != D)
          throw ConfigError("intervention direction has wrong dimension");
        dir = Eigen::Map<const Eigen::VectorXd>(vec.data(), D);
        if (dir.norm() <= 1e-12)
          throw ConfigError("intervention direction must be nonzero");
        dir.normalize();
      } else {
        const int axis = t.value("axis", 0);
        if (axis < 0 || axis >= D) throw ConfigError("intervention axis out of range");
        dir = Eigen::VectorXd::Unit(D, axis);
      }
      spec.targets[node] = dir;
    }
  }

  const Eigen::VectorXd ys = intervene(scm, spec, init, {}, seed);
  std::vector<double> samples(ys.data(), ys.data() + ys.size());

  InterventionSpec base_spec = spec;
  base_spec.targets.clear();
  const Eigen::VectorXd base =
      intervene(scm, base_spec, init, {}, rng::derive(seed, 0xba5e));
  std::vector<double> base_samples(base.data(), base.data() + base.size());

  const auto h_gauss = causal_entropy(samples, EntropyEstimator::kGaussianPlugin);
  const auto h_hist = samples.size() >= 2
                          ? causal_entropy(samples, EntropyEstimator::kHistogram)
                          : h_gauss;
  const auto h_base = causal_entropy(base_samples);

  {
    std::ofstream out(fs::path(out_dir) / "samples.csv");
    out << "sample,y\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
      out << i << ',' << fmt(samples[i]) << '\n';
  }

  std::ofstream report(fs::path(out_dir) / "report.txt");
  auto emit = [&](const std::string& k, const std::string& v) {
    report << k << '=' << v << '\n';
    std::cout << k << '=' << v << '\n';
  };
  emit("samples", std::to_string(spec.n_samples));
  emit("horizon", std::to_string(spec.horizon));
  emit("h_causal_gaussian", fmt(h_gauss.value));
  emit("h_causal_gaussian_degenerate", h_gauss.degenerate ? "1" : "0");
  emit("h_causal_histogram", fmt(h_hist.value));
  emit("h_causal_baseline", fmt(h_base.value));

  // Identification confidence over candidate structures from the data.
  if (data.timesteps >= 20) {
    const VarInitResult vr = var_init(series, 2, 0.01);
    const auto posterior = identification_confidence(series, vr.edges, 2, 4);
    emit("identification_confidence", fmt(posterior.overall_confidence));
    std::ofstream pout(fs::path(out_dir) / "posterior.csv");
    pout << "node,map_confidence\n";
    for (std::size_t i = 0; i < posterior.nodes.size(); ++i)
      pout << i << ',' << fmt(posterior.nodes[i].map_confidence) << '\n';

    if (posterior_mixture) {
      // Pool samples across candidate structures proportionally to weight.
      std::vector<double> pooled;
      const auto& cands = posterior.nodes[readout_node].candidates;
      for (std::size_t c = 0; c < cands.size() && c < 4; ++c) {
        const int s_c = std::max(
            1, static_cast<int>(std::lround(cands[c].weight * spec.n_samples)));
        auto pc = parents;
        pc[readout_node] = cands[c].parents;
        ScmModel alt = fit_scm(series, pc);
        alt.readout_nodes = scm.readout_nodes;
        alt.readout_w = scm.readout_w;
        alt.readout_bias = scm.readout_bias;
        InterventionSpec alt_spec = spec;
        alt_spec.n_samples = s_c;
        const Eigen::VectorXd ya =
            intervene(alt, alt_spec, init, {}, rng::derive(seed, 0xa17, c));
        pooled.insert(pooled.end(), ya.data(), ya.data() + ya.size());
      }
      if (pooled.size() >= 2)
        emit("h_causal_posterior_mixture", fmt(causal_entropy(pooled).value));
    }
  }

  if (strength_sweep) {
    std::ofstream out(fs::path(out_dir) / "strength_sweep.csv");
    out << "strength,h_causal\n";
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      InterventionSpec sw = spec;
      sw.targets.clear();
      for (const auto& [node, dir] : spec.targets) {
        Eigen::VectorXd blend = (1.0 - s) * init.col(node) + s * dir;
        if (blend.norm() <= 1e-12) blend = dir;
        sw.targets[node] = blend.normalized();
      }
      const Eigen::VectorXd yy =
          intervene(scm, sw, init, {}, rng::derive(seed, 0x5717));
      std::vector<double> sv(yy.data(), yy.data() + yy.size());
      out << fmt(s) << ',' << fmt(causal_entropy(sv).value) << '\n';
    }
  }

  write_meta(out_dir, "intervene");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sphunc: hyperspherical uncertainty with causal structure"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out", ckpt_path, resume_path;
  long long seed = -1, samples = -1, horizon = -1;
  bool deterministic = true, kappa_hist = false, dropout_sweep = false;
  bool strength_sweep = false, posterior_mixture = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "config file (JSON)")->required();
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", seed, "seed override");

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config_path, "config file (JSON)")->required();
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--seed", seed, "seed override");
  tr->add_option("--checkpoint", resume_path, "resume from checkpoint");
  tr->add_flag("--deterministic", deterministic,
               "single-threaded deterministic mode (always on)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_dir, "output directory");
  ev->add_flag("--kappa-hist", kappa_hist, "emit concentration histogram CSV");
  ev->add_flag("--dropout-sweep", dropout_sweep,
               "emit feature-dropout robustness CSV");

  auto* iv = app.add_subcommand("intervene", "interventional analysis");
  iv->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  iv->add_option("--data", data_dir, "dataset directory")->required();
  iv->add_option("--out", out_dir, "output directory");
  iv->add_option("--config", config_path, "config with intervention section");
  iv->add_option("--samples", samples, "Monte Carlo samples S");
  iv->add_option("--horizon", horizon, "simulation horizon T_sim");
  iv->add_option("--seed", seed, "seed override");
  iv->add_flag("--deterministic", deterministic,
               "single-threaded deterministic mode (always on)");
  iv->add_flag("--strength-sweep", strength_sweep,
               "emit intervention-strength sweep CSV");
  iv->add_flag("--posterior-mixture", posterior_mixture,
               "pool interventional samples over candidate structures");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, seed);
    if (tr->parsed())
      return cmd_train(config_path, data_dir, out_dir, seed, resume_path);
    if (ev->parsed())
      return cmd_eval(ckpt_path, data_dir, out_dir, kappa_hist, dropout_sweep);
    if (iv->parsed())
      return cmd_intervene(ckpt_path, data_dir, out_dir, config_path, samples,
                           horizon, seed, strength_sweep, posterior_mixture);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
