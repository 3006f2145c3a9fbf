// qread: generate synthetic readout data, train discriminators, evaluate them.
//
// Exit status: 0 on success, 2 for usage errors, 10 + ErrorCode for library
// errors (see README), 1 for anything else.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qread/config.hpp"
#include "qread/dataset_io.hpp"
#include "qread/error.hpp"
#include "qread/metrics.hpp"
#include "qread/pipeline.hpp"
#include "qread/relaxation.hpp"
#include "qread/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qread;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitErrorBase = 10;

// Owns one command's output directory. Anything created through it is
// removed again if the command fails.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)), existed_(fs::exists(root_)) {
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  fs::path claim(const fs::path& rel) {
    const fs::path p = root_ / rel;
    // record the outermost new component so cleanup removes whole subtrees
    fs::path walk = root_;
    for (const auto& part : rel) {
      walk /= part;
      if (!fs::exists(walk)) {
        created_.push_back(walk);
        break;
      }
    }
    fs::create_directories(p.parent_path());
    return p;
  }

  void write_text(const fs::path& rel, const std::string& text) {
    std::ofstream out(claim(rel), std::ios::binary);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + (root_ / rel).string());
    out << text;
  }

  void write_json(const fs::path& rel, const json& j) { write_text(rel, j.dump(1) + "\n"); }

  void log(const std::string& command, const std::string& line) {
    if (!log_.is_open()) log_.open(claim(fs::path("logs") / (command + ".log")), std::ios::app);
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "[%8.2fs] ", t);
    log_ << stamp << line << '\n';
    log_.flush();
    std::cerr << line << '\n';
  }

  void commit() { committed_ = true; }

  ~RunDir() {
    if (committed_) return;
    log_.close();
    std::error_code ec;
    if (!existed_) {
      fs::remove_all(root_, ec);
      return;
    }
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
  }

 private:
  fs::path root_;
  bool existed_;
  bool committed_ = false;
  std::vector<fs::path> created_;
  std::ofstream log_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Common {
  std::string config_path;
  std::string out;
  unsigned threads = 1;
};

ExperimentConfig load(const Common& c) { return load_config(c.config_path); }

json stamp(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& command) {
  return {{"command", command}, {"seed", seed}, {"config_hash", config_hash(cfg)}};
}

std::string csv_of(const std::vector<metrics::MetricsReport>& reports) {
  std::string out = metrics::csv_header();
  for (const auto& r : reports) out += metrics::to_csv_rows(r);
  return out;
}

std::vector<pipeline::Kind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<pipeline::Kind> kinds;
  for (const auto& n : names) {
    if (n == "all") {
      kinds = {pipeline::Kind::mf, pipeline::Kind::mf_nn, pipeline::Kind::mf_rmf_nn, pipeline::Kind::raw_fnn};
      continue;
    }
    kinds.push_back(pipeline::parse_kind(n));
  }
  return kinds;
}

std::uint64_t model_seed(const pipeline::Pipeline& p) { return p.provenance.value("seed", std::uint64_t{0}); }

// ---- commands --------------------------------------------------------------

int cmd_generate(const Common& c, std::uint64_t seed, std::optional<std::size_t> shots) {
  auto cfg = load(c);
  cfg.sim.seed = seed;
  if (shots) cfg.sim.shots_per_basis_state = *shots;
  RunDir run(c.out);
  run.log("generate", "generating " + std::to_string(cfg.sim.shots_per_basis_state << cfg.sim.num_qubits) +
                          " shots, seed " + std::to_string(seed));
  const auto ds = generate(cfg.sim, cfg.noise);
  run.claim(kManifestFile);
  run.claim(kBlobFile);
  save_dataset(ds, run.root());
  run.write_text("resolved-config.yaml", emit_config(cfg));
  run.log("generate", "wrote " + run.root().string());
  run.commit();
  return 0;
}

int cmd_train(const Common& c, std::uint64_t seed, const std::vector<std::string>& kind_names,
              const std::string& data) {
  auto cfg = load(c);
  cfg.fit.hyper.seed = seed;
  const auto kinds = parse_kinds(kind_names);
  const auto ds = load_dataset(data);
  const auto split = split_dataset(ds, cfg.split, cfg.split_seed);
  RunDir run(c.out);
  run.write_text("resolved-config.yaml", emit_config(cfg));
  for (auto kind : kinds) {
    const std::string name(pipeline::kind_name(kind));
    run.log("train", "training " + name + " on " + std::to_string(split.train.size()) + " shots");
    auto p = pipeline::fit(kind, ds, split, cfg.fit);
    p.provenance = {{"seed", seed}, {"config_hash", config_hash(cfg)}, {"dataset", data}};
    for (const auto& n : p.notices) run.log("train", "notice: " + n);
    const fs::path model_dir = fs::path("models") / name;
    run.claim(model_dir);
    pipeline::save_pipeline(p, run.root() / model_dir);

    auto rep = stamp(cfg, seed, "train");
    rep["kind"] = pipeline::kind_name(p.kind);
    rep["requested_kind"] = name;
    rep["notices"] = p.notices;
    rep["train_shots"] = split.train.size();
    rep["validation_shots"] = split.validation.size();
    if (p.network) {
      rep["epochs_run"] = p.network->info.epochs_run;
      rep["best_epoch"] = p.network->info.best_epoch;
      rep["best_validation_loss"] = p.network->info.best_validation_loss;
    }
    rep["validation"] = metrics::to_json(metrics::evaluate(p, ds, split.validation, p.trained_bins,
                                                           {pipeline::Precision::floating, c.threads}));
    run.write_json(fs::path("reports") / ("train_" + name + ".json"), rep);
  }
  run.commit();
  return 0;
}

std::vector<std::size_t> evaluation_shots(const LabeledDataset& ds, const ExperimentConfig& cfg, bool all) {
  if (!all) return split_dataset(ds, cfg.split, cfg.split_seed).test;
  std::vector<std::size_t> shots(ds.num_shots());
  for (std::size_t k = 0; k < shots.size(); ++k) shots[k] = k;
  return shots;
}

int cmd_evaluate(const Common& c, const std::string& model, const std::string& data, std::optional<std::size_t> bins,
                 bool fixed, bool all_shots) {
  const auto cfg = load(c);
  const auto p = pipeline::load_pipeline(model);
  const auto ds = load_dataset(data);
  const auto shots = evaluation_shots(ds, cfg, all_shots);
  const std::size_t use = bins.value_or(p.trained_bins);
  const auto precision = fixed ? pipeline::Precision::fixed_point : pipeline::Precision::floating;
  RunDir run(c.out);
  run.write_text("resolved-config.yaml", emit_config(cfg));
  run.log("evaluate", "evaluating " + std::string(pipeline::kind_name(p.kind)) + " at " + std::to_string(use) +
                          " bins on " + std::to_string(shots.size()) + " shots");
  const auto r = metrics::evaluate(p, ds, shots, use, {precision, c.threads});
  auto rep = stamp(cfg, model_seed(p), "evaluate");
  rep["precision"] = fixed ? "fixed_point" : "floating";
  rep["dataset"] = data;
  rep["model"] = model;
  rep["report"] = metrics::to_json(r);
  const std::string stem =
      "eval_" + std::string(pipeline::kind_name(p.kind)) + "_" + std::to_string(use) + (fixed ? "_fixed" : "");
  run.write_json(fs::path("reports") / (stem + ".json"), rep);
  run.write_text(fs::path("reports") / (stem + ".csv"), csv_of({r}));
  run.log("evaluate", "cumulative accuracy " + std::to_string(r.cumulative));
  std::cout << rep.dump(1) << '\n';
  run.commit();
  return 0;
}

int cmd_sweep_duration(const Common& c, const std::string& model, const std::string& data,
                       std::vector<std::size_t> durations, double epsilon, bool fixed) {
  const auto cfg = load(c);
  const auto p = pipeline::load_pipeline(model);
  const auto ds = load_dataset(data);
  const auto shots = evaluation_shots(ds, cfg, false);
  if (durations.empty())
    for (std::size_t k = 1; k <= 10; ++k) durations.push_back(std::max<std::size_t>(1, p.trained_bins * k / 10));
  RunDir run(c.out);
  run.write_text("resolved-config.yaml", emit_config(cfg));
  run.log("sweep-duration", "sweeping " + std::to_string(durations.size()) + " windows");
  const auto sweep = metrics::sweep_duration(
      p, ds, shots, durations, epsilon,
      {fixed ? pipeline::Precision::fixed_point : pipeline::Precision::floating, c.threads});
  auto rep = stamp(cfg, model_seed(p), "sweep-duration");
  rep["kind"] = pipeline::kind_name(p.kind);
  rep["dt_ns"] = p.dt_ns;
  rep["sweep"] = metrics::to_json(sweep);
  const std::string stem = "sweep_duration_" + std::string(pipeline::kind_name(p.kind));
  run.write_json(fs::path("reports") / (stem + ".json"), rep);
  run.write_text(fs::path("reports") / (stem + ".csv"), csv_of(sweep.rows));
  run.commit();
  return 0;
}

int cmd_sweep_train_size(const Common& c, std::uint64_t seed, const std::string& kind_name,
                         const std::string& data, const std::vector<std::size_t>& sizes) {
  auto cfg = load(c);
  cfg.fit.hyper.seed = seed;
  const auto kind = pipeline::parse_kind(kind_name);
  const auto ds = load_dataset(data);
  const auto split = split_dataset(ds, cfg.split, cfg.split_seed);
  std::vector<std::size_t> grid = sizes;
  if (grid.empty())
    for (std::size_t k = 1; k <= 5; ++k) grid.push_back(split.train.size() * k / 5);
  RunDir run(c.out);
  run.write_text("resolved-config.yaml", emit_config(cfg));
  run.log("sweep-train-size", "sweeping " + std::to_string(grid.size()) + " training sizes");
  const auto rows = metrics::sweep_train_size(kind, ds, split, grid, seed, cfg.fit,
                                              {pipeline::Precision::floating, c.threads});
  auto rep = stamp(cfg, seed, "sweep-train-size");
  rep["kind"] = kind_name;
  rep["rows"] = metrics::to_json(rows);
  std::vector<metrics::MetricsReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  run.write_json(fs::path("reports") / ("sweep_train_size_" + kind_name + ".json"), rep);
  run.write_text(fs::path("reports") / ("sweep_train_size_" + kind_name + ".csv"), csv_of(reports));
  run.commit();
  return 0;
}

int cmd_label_relax(const Common& c, const std::string& data, std::optional<double> horizon) {
  const auto cfg = load(c);
  const auto ds = load_dataset(data);
  const auto split = split_dataset(ds, cfg.split, cfg.split_seed);
  const double h = horizon.value_or(static_cast<double>(ds.num_bins()) * ds.dt_ns() / 2);
  RunDir run(c.out);
  run.write_text("resolved-config.yaml", emit_config(cfg));
  auto rep = stamp(cfg, cfg.split_seed, "label-relax");
  rep["horizon_ns"] = h;
  json per_qubit = json::array();
  for (int q = 0; q < ds.num_qubits(); ++q) {
    std::vector<Trace> t0, t1;
    std::vector<std::size_t> shots1;
    std::vector<TransitionEvent> truth;
    for (std::size_t s : split.train) {
      auto tr = pipeline::qubit_traces(ds, s, cfg.fit.demux_boxcar);
      if (ds.prepared_bit(s, q)) {
        t1.push_back(std::move(tr[static_cast<std::size_t>(q)]));
        shots1.push_back(s);
        if (ds.has_ground_truth()) truth.push_back(ds.ground_truth(s, q));
      } else {
        t0.push_back(std::move(tr[static_cast<std::size_t>(q)]));
      }
    }
    const std::vector<TraceView> v0(t0.begin(), t0.end()), v1(t1.begin(), t1.end());
    const auto report = relax::label_relaxations(v0, v1);
    json j = relax::to_json(report);
    std::vector<std::size_t> flagged_shots;
    for (std::size_t k : report.relax_indices) flagged_shots.push_back(shots1[k]);
    j["qubit"] = q + 1;
    j["flagged_shots"] = flagged_shots;
    if (ds.has_ground_truth()) {
      const auto lq = relax::score_labels(report, truth, h);
      j["quality"] = {{"true_events", lq.true_events}, {"flagged", lq.flagged},     {"hits", lq.hits},
                      {"recall", lq.recall},           {"precision", lq.precision}, {"contamination", lq.contamination}};
      run.log("label-relax", "qubit " + std::to_string(q + 1) + ": " + std::to_string(lq.flagged) +
                                 " flagged, recall " + std::to_string(lq.recall) + ", precision " +
                                 std::to_string(lq.precision));
    }
    per_qubit.push_back(std::move(j));
  }
  rep["qubits"] = per_qubit;
  run.write_json(fs::path("reports") / "label_relax.json", rep);
  run.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Qubit readout discrimination: simulate, train, evaluate"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 0;
  std::optional<std::size_t> shots, bins;
  std::optional<double> horizon;
  std::vector<std::string> kinds;
  std::string kind, data, model;
  std::vector<std::size_t> list;
  double epsilon = 0.005;
  bool fixed = false, all_shots = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "experiment YAML")->required();
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--threads", common.threads, "worker threads for evaluation")->check(CLI::Range(1u, 256u));
  };

  auto* gen = app.add_subcommand("generate", "simulate a labeled dataset");
  add_common(gen);
  gen->add_option("--seed", seed, "simulator seed")->required();
  gen->add_option("--shots", shots, "shots per basis state (overrides the config)");

  auto* train = app.add_subcommand("train", "fit one or more pipelines on the training split");
  add_common(train);
  train->add_option("--seed", seed, "network initialization and shuffling seed")->required();
  train->add_option("--kind", kinds, "mf | mf_nn | mf_rmf_nn | raw_fnn | all")->required();
  train->add_option("--data", data, "dataset directory")->required();

  auto* eval = app.add_subcommand("evaluate", "score a trained pipeline on the test split");
  add_common(eval);
  eval->add_option("--model", model, "pipeline directory")->required();
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--use-bins", bins, "readout window in bins (default: trained window)");
  eval->add_flag("--fixed-point", fixed, "use the integer network");
  eval->add_flag("--all-shots", all_shots, "score every shot instead of the test split");

  auto* sweep_d = app.add_subcommand("sweep-duration", "accuracy against readout window");
  add_common(sweep_d);
  sweep_d->add_option("--model", model, "pipeline directory")->required();
  sweep_d->add_option("--data", data, "dataset directory")->required();
  sweep_d->add_option("--bins", list, "windows to evaluate (default: tenths of the trained window)")->delimiter(',');
  sweep_d->add_option("--epsilon", epsilon, "saturation tolerance on cumulative accuracy");
  sweep_d->add_flag("--fixed-point", fixed, "use the integer network");

  auto* sweep_t = app.add_subcommand("sweep-train-size", "accuracy against training-set size");
  add_common(sweep_t);
  sweep_t->add_option("--seed", seed, "subset and training seed")->required();
  sweep_t->add_option("--kind", kind, "pipeline kind")->required();
  sweep_t->add_option("--data", data, "dataset directory")->required();
  sweep_t->add_option("--sizes", list, "training-set sizes (default: fifths of the training split)")->delimiter(',');

  auto* label = app.add_subcommand("label-relax", "run relaxation labeling on the training split");
  add_common(label);
  label->add_option("--data", data, "dataset directory")->required();
  label->add_option("--horizon-ns", horizon, "ground-truth horizon for scoring (default: half the window)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(common, seed, shots);
    if (*train) return cmd_train(common, seed, kinds, data);
    if (*eval) return cmd_evaluate(common, model, data, bins, fixed, all_shots);
    if (*sweep_d) return cmd_sweep_duration(common, model, data, list, epsilon, fixed);
    if (*sweep_t) return cmd_sweep_train_size(common, seed, kind, data, list);
    if (*label) return cmd_label_relax(common, data, horizon);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitErrorBase + static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
