#include "qread/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "qread/error.hpp"

namespace qread {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    bad(where + "." + key, e.what());
  }
}

IQPoint read_point(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() != 2) bad(where, "expected [i, q]");
  try {
    return {node[0].as<double>(), node[1].as<double>()};
  } catch (const YAML::Exception& e) {
    bad(where, e.what());
  }
}

void emit_double(YAML::Emitter& out, double v) {
  if (std::isinf(v)) {
    out << (v > 0 ? ".inf" : "-.inf");
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << std::string(buf);
}

// A misspelled key would otherwise fall back to its default without notice.
void reject_unknown(const YAML::Node& node, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!node) return;
  if (!node.IsMap()) bad(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end())
      bad(where.empty() ? key : where + "." + key, "unknown key");
  }
}

ExperimentConfig from_node(const YAML::Node& root) {
  ExperimentConfig c;
  reject_unknown(root, {"sim", "qubits", "crosstalk", "split", "train", "pipeline"}, "");
  reject_unknown(root["sim"], {"num_qubits", "duration_ns", "dt_ns", "shots_per_basis_state", "seed", "mode"}, "sim");
  reject_unknown(root["split"], {"ratios", "seed"}, "split");
  reject_unknown(root["train"], {"batch_size", "learning_rate", "momentum", "patience", "max_epochs", "seed"}, "train");
  reject_unknown(root["pipeline"], {"demux_boxcar", "min_relax", "quant_bits"}, "pipeline");
  const auto sim = root["sim"];
  read(sim, "num_qubits", c.sim.num_qubits, "sim");
  read(sim, "duration_ns", c.sim.duration_ns, "sim");
  read(sim, "dt_ns", c.sim.dt_ns, "sim");
  read(sim, "shots_per_basis_state", c.sim.shots_per_basis_state, "sim");
  read(sim, "seed", c.sim.seed, "sim");
  std::string mode = "demultiplexed";
  read(sim, "mode", mode, "sim");
  if (mode == "composite")
    c.sim.mode = Layout::composite;
  else if (mode == "demultiplexed")
    c.sim.mode = Layout::demultiplexed;
  else
    bad("sim.mode", "expected demultiplexed or composite");

  const auto qubits = root["qubits"];
  if (!qubits || !qubits.IsSequence()) bad("qubits", "expected a list with one entry per qubit");
  for (std::size_t k = 0; k < qubits.size(); ++k) {
    const auto q = qubits[k];
    const std::string where = "qubits[" + std::to_string(k) + "]";
    reject_unknown(q, {"steady_state_0", "steady_state_1", "ring_up_tau_ns", "t1_ns", "if_freq_mhz", "noise_sigma",
                       "excitation_prob"}, where);
    QubitModel m;
    if (q["steady_state_0"]) m.steady_state_0 = read_point(q["steady_state_0"], where + ".steady_state_0");
    if (q["steady_state_1"]) m.steady_state_1 = read_point(q["steady_state_1"], where + ".steady_state_1");
    read(q, "ring_up_tau_ns", m.ring_up_tau_ns, where);
    read(q, "t1_ns", m.t1_ns, where);
    read(q, "if_freq_mhz", m.if_freq_mhz, where);
    read(q, "noise_sigma", m.noise_sigma, where);
    read(q, "excitation_prob", m.excitation_prob, where);
    c.noise.qubits.push_back(m);
  }
  if (root["crosstalk"]) {
    try {
      c.noise.crosstalk = root["crosstalk"].as<std::vector<std::vector<double>>>();
    } catch (const YAML::Exception& e) {
      bad("crosstalk", e.what());
    }
  }

  const auto split = root["split"];
  if (split && split["ratios"]) {
    std::vector<double> r;
    read(split, "ratios", r, "split");
    if (r.size() != 3) bad("split.ratios", "expected [train, validation, test]");
    c.split = {r[0], r[1], r[2]};
  }
  read(split, "seed", c.split_seed, "split");

  const auto train = root["train"];
  read(train, "batch_size", c.fit.hyper.batch_size, "train");
  read(train, "learning_rate", c.fit.hyper.learning_rate, "train");
  read(train, "momentum", c.fit.hyper.momentum, "train");
  read(train, "patience", c.fit.hyper.patience, "train");
  read(train, "max_epochs", c.fit.hyper.max_epochs, "train");
  read(train, "seed", c.fit.hyper.seed, "train");

  const auto pipe = root["pipeline"];
  read(pipe, "demux_boxcar", c.fit.demux_boxcar, "pipeline");
  read(pipe, "min_relax", c.fit.min_relax, "pipeline");
  read(pipe, "quant_bits", c.fit.quant_bits, "pipeline");

  validate(c.sim, c.noise);
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  try {
    return from_node(YAML::Load(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("YAML: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_qubits" << YAML::Value << c.sim.num_qubits;
  out << YAML::Key << "duration_ns" << YAML::Value;
  emit_double(out, c.sim.duration_ns);
  out << YAML::Key << "dt_ns" << YAML::Value;
  emit_double(out, c.sim.dt_ns);
  out << YAML::Key << "shots_per_basis_state" << YAML::Value << c.sim.shots_per_basis_state;
  out << YAML::Key << "seed" << YAML::Value << c.sim.seed;
  out << YAML::Key << "mode" << YAML::Value << (c.sim.mode == Layout::composite ? "composite" : "demultiplexed");
  out << YAML::EndMap;

  out << YAML::Key << "qubits" << YAML::Value << YAML::BeginSeq;
  for (const auto& q : c.noise.qubits) {
    out << YAML::BeginMap;
    out << YAML::Key << "steady_state_0" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    emit_double(out, q.steady_state_0.i);
    emit_double(out, q.steady_state_0.q);
    out << YAML::EndSeq;
    out << YAML::Key << "steady_state_1" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    emit_double(out, q.steady_state_1.i);
    emit_double(out, q.steady_state_1.q);
    out << YAML::EndSeq;
    out << YAML::Key << "ring_up_tau_ns" << YAML::Value;
    emit_double(out, q.ring_up_tau_ns);
    out << YAML::Key << "t1_ns" << YAML::Value;
    emit_double(out, q.t1_ns);
    out << YAML::Key << "if_freq_mhz" << YAML::Value;
    emit_double(out, q.if_freq_mhz);
    out << YAML::Key << "noise_sigma" << YAML::Value;
    emit_double(out, q.noise_sigma);
    out << YAML::Key << "excitation_prob" << YAML::Value;
    emit_double(out, q.excitation_prob);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  if (!c.noise.crosstalk.empty()) {
    out << YAML::Key << "crosstalk" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : c.noise.crosstalk) {
      out << YAML::Flow << YAML::BeginSeq;
      for (double a : row) emit_double(out, a);
      out << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  }

  out << YAML::Key << "split" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "ratios" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  emit_double(out, c.split.train);
  emit_double(out, c.split.validation);
  emit_double(out, c.split.test);
  out << YAML::EndSeq;
  out << YAML::Key << "seed" << YAML::Value << c.split_seed;
  out << YAML::EndMap;

  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "batch_size" << YAML::Value << c.fit.hyper.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value;
  emit_double(out, c.fit.hyper.learning_rate);
  out << YAML::Key << "momentum" << YAML::Value;
  emit_double(out, c.fit.hyper.momentum);
  out << YAML::Key << "patience" << YAML::Value << c.fit.hyper.patience;
  out << YAML::Key << "max_epochs" << YAML::Value << c.fit.hyper.max_epochs;
  out << YAML::Key << "seed" << YAML::Value << c.fit.hyper.seed;
  out << YAML::EndMap;

  out << YAML::Key << "pipeline" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "demux_boxcar" << YAML::Value << c.fit.demux_boxcar;
  out << YAML::Key << "min_relax" << YAML::Value << c.fit.min_relax;
  out << YAML::Key << "quant_bits" << YAML::Value << c.fit.quant_bits;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : emit_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.sim.num_qubits = 3;
  c.sim.duration_ns = 1000.0;
  c.sim.dt_ns = 2.0;
  c.sim.shots_per_basis_state = 3600;
  c.sim.seed = 2024;
  c.sim.mode = Layout::composite;

  QubitModel q1;
  q1.steady_state_0 = {0.0, 0.0};
  q1.steady_state_1 = {1.0, 0.0};
  q1.ring_up_tau_ns = 60.0;
  q1.t1_ns = 8500.0;
  q1.if_freq_mhz = 25.0;
  q1.noise_sigma = 1.2;
  QubitModel q2 = q1;
  q2.steady_state_0 = {0.2, 0.1};
  q2.steady_state_1 = {0.4, 1.0};
  q2.if_freq_mhz = 75.0;
  QubitModel q3 = q1;
  q3.steady_state_0 = {-0.2, 0.0};
  q3.steady_state_1 = {0.6, -0.6};
  q3.if_freq_mhz = 125.0;
  c.noise.qubits = {q1, q2, q3};
  c.noise.crosstalk = {{1.0, 0.2, 0.1}, {0.16, 1.0, 0.2}, {0.1, 0.2, 1.0}};

  c.split = {0.195, 0.105, 0.70};
  c.split_seed = 7;
  c.fit.hyper = {64, 1e-2, 0.9, 30, 200, 11};
  c.fit.demux_boxcar = 10;
  c.fit.min_relax = 20;
  c.fit.quant_bits = 16;
  return c;
}

}  // namespace qread
