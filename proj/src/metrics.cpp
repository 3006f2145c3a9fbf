#include "qread/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "qread/error.hpp"
#include "qread/rng.hpp"

namespace qread::metrics {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs fn(begin, end) over contiguous chunks. Each index is owned by one
// chunk, so per-index outputs are independent of the thread count.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

double cumulative_accuracy(std::span<const double> per_qubit) {
  if (per_qubit.empty()) return 0.0;
  double log_sum = 0.0;
  for (double f : per_qubit) {
    if (f <= 0.0) return 0.0;
    log_sum += std::log(f);
  }
  return std::exp(log_sum / static_cast<double>(per_qubit.size()));
}

MetricsReport score(std::span<const std::uint32_t> prepared, std::span<const std::uint32_t> predicted, int num_qubits,
                    std::string kind, std::size_t use_bins) {
  if (prepared.empty()) throw Error(ErrorCode::EmptyEvaluation, "no shots to score");
  if (prepared.size() != predicted.size())
    throw Error(ErrorCode::InvalidArgument, "prepared and predicted counts differ");
  MetricsReport r;
  r.kind = std::move(kind);
  r.use_bins = use_bins;
  r.shots = prepared.size();
  const auto n = static_cast<std::size_t>(num_qubits);
  r.confusion.resize(n);
  for (std::size_t s = 0; s < prepared.size(); ++s)
    for (std::size_t q = 0; q < n; ++q) {
      const bool want = (prepared[s] >> q) & 1u;
      const bool got = (predicted[s] >> q) & 1u;
      auto& c = r.confusion[q];
      if (!want)
        (got ? c.wrong_0 : c.correct_0) += 1;
      else
        (got ? c.correct_1 : c.wrong_1) += 1;
    }
  for (const auto& c : r.confusion) r.accuracy.push_back(c.accuracy());
  r.cumulative = cumulative_accuracy(r.accuracy);
  return r;
}

MetricsReport evaluate(const pipeline::Pipeline& p, const LabeledDataset& ds, std::span<const std::size_t> shots,
                       std::size_t use_bins, const EvalOptions& options) {
  if (shots.empty()) throw Error(ErrorCode::EmptyEvaluation, "empty test set");
  std::vector<std::uint32_t> prepared(shots.size());
  std::vector<std::uint32_t> predicted(shots.size());
  parallel_chunks(shots.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto traces = pipeline::qubit_traces(p, ds, shots[k]);
      prepared[k] = ds.state(shots[k]);
      predicted[k] = pipeline::discriminate_state(p, traces, use_bins, options.precision);
    }
  });
  return score(prepared, predicted, p.num_qubits, std::string(pipeline::kind_name(p.kind)), use_bins);
}

DurationSweep sweep_duration(const pipeline::Pipeline& p, const LabeledDataset& ds, std::span<const std::size_t> shots,
                             std::span<const std::size_t> durations, double epsilon, const EvalOptions& options) {
  if (shots.empty()) throw Error(ErrorCode::EmptyEvaluation, "empty test set");
  if (durations.empty()) throw Error(ErrorCode::InvalidArgument, "no durations to sweep");
  for (std::size_t d : durations)
    if (d < 1 || d > p.trained_bins)
      throw Error(ErrorCode::InvalidWindow, "duration " + std::to_string(d) + " outside [1, " +
                                                std::to_string(p.trained_bins) + "]");
  if (p.kind == pipeline::Kind::raw_fnn)
    for (std::size_t d : durations)
      if (d != p.trained_bins)
        throw Error(ErrorCode::UnsupportedTruncation, "raw-trace network cannot be evaluated on a shorter window");

  // Column 0 is the full window; the rest follow `durations`.
  std::vector<std::size_t> windows{p.trained_bins};
  windows.insert(windows.end(), durations.begin(), durations.end());
  std::vector<std::uint32_t> prepared(shots.size());
  std::vector<std::vector<std::uint32_t>> predicted(windows.size(), std::vector<std::uint32_t>(shots.size()));
  parallel_chunks(shots.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto traces = pipeline::qubit_traces(p, ds, shots[k]);
      prepared[k] = ds.state(shots[k]);
      for (std::size_t w = 0; w < windows.size(); ++w)
        predicted[w][k] = pipeline::discriminate_state(p, traces, windows[w], options.precision);
    }
  });

  DurationSweep sweep;
  sweep.epsilon = epsilon;
  const std::string kind(pipeline::kind_name(p.kind));
  sweep.reference_cumulative = score(prepared, predicted[0], p.num_qubits, kind, windows[0]).cumulative;
  for (std::size_t w = 1; w < windows.size(); ++w)
    sweep.rows.push_back(score(prepared, predicted[w], p.num_qubits, kind, windows[w]));
  for (const auto& row : sweep.rows)
    if (row.cumulative >= sweep.reference_cumulative - epsilon &&
        (!sweep.saturation_bins || row.use_bins < *sweep.saturation_bins))
      sweep.saturation_bins = row.use_bins;
  return sweep;
}

std::vector<std::size_t> training_subset(const LabeledDataset& ds, std::span<const std::size_t> train,
                                         std::size_t size, std::uint64_t seed) {
  if (size > train.size())
    throw Error(ErrorCode::InvalidArgument,
                "subset size " + std::to_string(size) + " exceeds training set " + std::to_string(train.size()));
  std::vector<std::size_t> pool(train.begin(), train.end());
  if (size < pool.size()) {
    SplitMix64 rng(derive_seed(seed, {0x53495a45u, size}));
    shuffle(pool, rng);
    pool.resize(size);
    std::sort(pool.begin(), pool.end());
  }
  for (int q = 0; q < ds.num_qubits(); ++q) {
    std::size_t ones = 0;
    for (std::size_t s : pool) ones += static_cast<std::size_t>(ds.prepared_bit(s, q));
    if (ones < 2 || pool.size() - ones < 2)
      throw Error(ErrorCode::InsufficientData, "training subset of " + std::to_string(size) + " leaves qubit " +
                                                   std::to_string(q + 1) + " with fewer than 2 shots per class");
  }
  return pool;
}

std::vector<TrainSizeRow> sweep_train_size(pipeline::Kind kind, const LabeledDataset& ds, const DatasetSplit& split,
                                           std::span<const std::size_t> sizes, std::uint64_t seed,
                                           const pipeline::FitConfig& config, const EvalOptions& options) {
  std::vector<TrainSizeRow> rows;
  for (std::size_t size : sizes) {
    const auto subset = training_subset(ds, split.train, size, seed);
    const auto p = pipeline::fit(kind, ds, subset, split.validation, config);
    rows.push_back({size, evaluate(p, ds, split.test, p.trained_bins, options)});
  }
  return rows;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json conf = nlohmann::json::array();
  for (const auto& c : r.confusion)
    conf.push_back({{"correct_0", c.correct_0}, {"wrong_0", c.wrong_0}, {"correct_1", c.correct_1}, {"wrong_1", c.wrong_1}});
  return {{"kind", r.kind},         {"use_bins", r.use_bins},     {"shots", r.shots},
          {"accuracy", r.accuracy}, {"cumulative", r.cumulative}, {"confusion", conf}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.kind = j.at("kind").get<std::string>();
    r.use_bins = j.at("use_bins").get<std::size_t>();
    r.shots = j.at("shots").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<std::vector<double>>();
    r.cumulative = j.at("cumulative").get<double>();
    for (const auto& c : j.at("confusion"))
      r.confusion.push_back({c.at("correct_0").get<std::uint64_t>(), c.at("wrong_0").get<std::uint64_t>(),
                             c.at("correct_1").get<std::uint64_t>(), c.at("wrong_1").get<std::uint64_t>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("metrics JSON: ") + e.what());
  }
}

std::string csv_header() { return "kind,bins,qubit,accuracy,correct_0,wrong_0,correct_1,wrong_1,shots\n"; }

std::string to_csv_rows(const MetricsReport& r) {
  std::ostringstream out;
  for (std::size_t q = 0; q < r.accuracy.size(); ++q) {
    const auto& c = r.confusion[q];
    out << r.kind << ',' << r.use_bins << ',' << (q + 1) << ',' << fmt17(r.accuracy[q]) << ',' << c.correct_0 << ','
        << c.wrong_0 << ',' << c.correct_1 << ',' << c.wrong_1 << ',' << r.shots << '\n';
  }
  out << r.kind << ',' << r.use_bins << ",all," << fmt17(r.cumulative) << ",,,,," << r.shots << '\n';
  return out.str();
}

std::vector<MetricsReport> reports_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<MetricsReport> out;
  MetricsReport current;
  bool open = false;
  std::getline(in, line);
  if (line + "\n" != csv_header()) throw Error(ErrorCode::FormatError, "unexpected CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < 9) cells.emplace_back();
    if (!open) {
      current = MetricsReport{};
      current.kind = cells[0];
      current.use_bins = std::stoull(cells[1]);
      open = true;
    }
    current.shots = std::stoull(cells[8]);
    if (cells[2] == "all") {
      current.cumulative = std::strtod(cells[3].c_str(), nullptr);
      out.push_back(current);
      open = false;
    } else {
      current.accuracy.push_back(std::strtod(cells[3].c_str(), nullptr));
      current.confusion.push_back({std::stoull(cells[4]), std::stoull(cells[5]), std::stoull(cells[6]),
                                   std::stoull(cells[7])});
    }
  }
  if (open) throw Error(ErrorCode::FormatError, "CSV ends inside a report");
  return out;
}

nlohmann::json to_json(const DurationSweep& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) rows.push_back(to_json(r));
  return {{"epsilon", s.epsilon},
          {"reference_cumulative", s.reference_cumulative},
          {"saturation_bins", s.saturation_bins ? nlohmann::json(*s.saturation_bins) : nlohmann::json(nullptr)},
          {"rows", rows}};
}

nlohmann::json to_json(std::span<const TrainSizeRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"size", r.size}, {"report", to_json(r.report)}});
  return out;
}

}  // namespace qread::metrics
