#include "sphunc/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sphunc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& out, const std::string& name,
                  const Eigen::MatrixXd& m) {
  out << "mat " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out << (c ? " " : "") << fmt(m(r, c));
    out << '\n';
  }
}

void write_vector(std::ostream& out, const std::string& name,
                  const Eigen::VectorXd& v) {
  out << "vec " << name << ' ' << v.size() << '\n';
  for (int i = 0; i < v.size(); ++i) out << (i ? " " : "") << fmt(v[i]);
  out << '\n';
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& expect) {
  std::string kind, name;
  int rows = 0, cols = 0;
  in >> kind >> name >> rows >> cols;
  if (kind != "mat" || name != expect)
    throw std::runtime_error("checkpoint: expected matrix " + expect +
                             ", found " + kind + " " + name);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) in >> m(r, c);
  return m;
}

Eigen::VectorXd read_vector(std::istream& in, const std::string& expect) {
  std::string kind, name;
  int n = 0;
  in >> kind >> name >> n;
  if (kind != "vec" || name != expect)
    throw std::runtime_error("checkpoint: expected vector " + expect +
                             ", found " + kind + " " + name);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) in >> v[i];
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const int n_nodes = static_cast<int>(params.parents.size());
  out << "# sphunc-checkpoint v1 D=" << params.latent_dim()
      << " d=" << params.feat_dim() << " N=" << n_nodes << " seed=" << seed
      << " classification=" << (params.classification ? 1 : 0)
      << " n_out=" << params.n_outputs()
      << " layers=" << params.layers.size()
      << " gates_trainable=" << (params.gates_trainable ? 1 : 0) << "\n";

  write_matrix(out, "W", params.W);
  write_vector(out, "b", params.b);
  write_matrix(out, "kappa_W1", params.kappa_head.W1);
  write_vector(out, "kappa_b1", params.kappa_head.b1);
  write_vector(out, "kappa_w2", params.kappa_head.w2);
  out << "scalar kappa_b2 " << fmt(params.kappa_head.b2) << '\n';
  out << "scalar kappa_min " << fmt(params.kappa_head.kappa_min) << '\n';
  out << "scalar kappa_max " << fmt(params.kappa_head.kappa_max) << '\n';
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    out << "scalar log_kappa_a_" << l << ' ' << fmt(params.layers[l].log_kappa_a)
        << '\n';
    write_matrix(out, "W_c_" + std::to_string(l), params.layers[l].W_c);
  }

  out << "parents " << n_nodes << '\n';
  for (int i = 0; i < n_nodes; ++i) {
    out << params.parents[i].size();
    for (int p : params.parents[i]) out << ' ' << p;
    out << '\n';
  }
  out << "gates " << params.gates.raw().size() << '\n';
  for (const auto& [key, gamma] : params.gates.raw()) {
    out << static_cast<int>(key >> 32) << ' '
        << static_cast<int>(key & 0xffffffffULL) << ' ' << fmt(gamma) << '\n';
  }
  out << "edges " << params.edge_coeffs.size() << '\n';
  for (const auto& e : params.edge_coeffs)
    out << e.src << ' ' << e.dst << ' ' << fmt(e.value) << ' ' << fmt(e.raw)
        << '\n';

  write_matrix(out, "alea_W1", params.alea.W1);
  write_vector(out, "alea_b1", params.alea.b1);
  write_vector(out, "alea_w2", params.alea.w2);
  out << "scalar alea_b2 " << fmt(params.alea.b2) << '\n';

  write_matrix(out, "fusion_A1", params.fusion.A1_raw);
  write_vector(out, "fusion_c1", params.fusion.c1);
  write_matrix(out, "fusion_A2", params.fusion.A2_raw);
  write_vector(out, "fusion_c2", params.fusion.c2);
  write_vector(out, "fusion_a3", params.fusion.a3_raw);
  out << "scalar fusion_c3 " << fmt(params.fusion.c3) << '\n';
  out << "scalar fusion_skip0 " << fmt(params.fusion.skip_raw[0]) << '\n';
  out << "scalar fusion_skip1 " << fmt(params.fusion.skip_raw[1]) << '\n';

  write_matrix(out, "readout_W", params.readout_W);
  write_vector(out, "readout_b", params.readout_b);
}

namespace {

double read_scalar(std::istream& in, const std::string& expect) {
  std::string kind, name;
  double v = 0.0;
  in >> kind >> name >> v;
  if (kind != "scalar" || name != expect)
    throw std::runtime_error("checkpoint: expected scalar " + expect +
                             ", found " + kind + " " + name);
  return v;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("# sphunc-checkpoint v1", 0) != 0)
    throw std::runtime_error("load_checkpoint: unrecognized format");
  auto field = [&](const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos)
      throw std::runtime_error("load_checkpoint: missing field " + key);
    return std::stoll(header.substr(pos + key.size() + 1));
  };

  Checkpoint ckpt;
  ckpt.seed = static_cast<std::uint64_t>(field("seed"));
  ModelParams& p = ckpt.params;
  p.classification = field("classification") != 0;
  p.gates_trainable = field("gates_trainable") != 0;
  const int n_layers = static_cast<int>(field("layers"));
  const int n_nodes = static_cast<int>(field("N"));

  p.W = read_matrix(in, "W");
  p.b = read_vector(in, "b");
  p.kappa_head.W1 = read_matrix(in, "kappa_W1");
  p.kappa_head.b1 = read_vector(in, "kappa_b1");
  p.kappa_head.w2 = read_vector(in, "kappa_w2");
  p.kappa_head.b2 = read_scalar(in, "kappa_b2");
  p.kappa_head.kappa_min = read_scalar(in, "kappa_min");
  p.kappa_head.kappa_max = read_scalar(in, "kappa_max");
  p.layers.resize(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    p.layers[l].log_kappa_a = read_scalar(in, "log_kappa_a_" + std::to_string(l));
    p.layers[l].W_c = read_matrix(in, "W_c_" + std::to_string(l));
  }

  std::string tag;
  int count = 0;
  in >> tag >> count;
  if (tag != "parents") throw std::runtime_error("checkpoint: expected parents");
  p.parents.assign(count, {});
  for (int i = 0; i < count; ++i) {
    int k = 0;
    in >> k;
    p.parents[i].resize(k);
    for (int j = 0; j < k; ++j) in >> p.parents[i][j];
  }
  in >> tag >> count;
  if (tag != "gates") throw std::runtime_error("checkpoint: expected gates");
  for (int i = 0; i < count; ++i) {
    int src = 0, dst = 0;
    double gamma = 0.0;
    in >> src >> dst >> gamma;
    p.gates.set(src, dst, gamma);
  }
  in >> tag >> count;
  if (tag != "edges") throw std::runtime_error("checkpoint: expected edges");
  p.edge_coeffs.resize(count);
  for (int i = 0; i < count; ++i)
    in >> p.edge_coeffs[i].src >> p.edge_coeffs[i].dst >>
        p.edge_coeffs[i].value >> p.edge_coeffs[i].raw;

  p.alea.W1 = read_matrix(in, "alea_W1");
  p.alea.b1 = read_vector(in, "alea_b1");
  p.alea.w2 = read_vector(in, "alea_w2");
  p.alea.b2 = read_scalar(in, "alea_b2");

  p.fusion.A1_raw = read_matrix(in, "fusion_A1");
  p.fusion.c1 = read_vector(in, "fusion_c1");
  p.fusion.A2_raw = read_matrix(in, "fusion_A2");
  p.fusion.c2 = read_vector(in, "fusion_c2");
  p.fusion.a3_raw = read_vector(in, "fusion_a3");
  p.fusion.c3 = read_scalar(in, "fusion_c3");
  p.fusion.skip_raw[0] = read_scalar(in, "fusion_skip0");
  p.fusion.skip_raw[1] = read_scalar(in, "fusion_skip1");

  p.readout_W = read_matrix(in, "readout_W");
  p.readout_b = read_vector(in, "readout_b");
  (void)n_nodes;
  return ckpt;
}

}  // namespace sphunc
