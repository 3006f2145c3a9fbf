#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qread/pipeline.hpp"
#include "qread/trace.hpp"

namespace qread::metrics {

/// Outcome counts for one qubit, split by prepared state.
struct Confusion {
  std::uint64_t correct_0 = 0;  ///< prepared '0', read '0'
  std::uint64_t wrong_0 = 0;    ///< prepared '0', read '1'
  std::uint64_t correct_1 = 0;
  std::uint64_t wrong_1 = 0;

  std::uint64_t total() const noexcept { return correct_0 + wrong_0 + correct_1 + wrong_1; }
  double accuracy() const noexcept {
    return total() ? static_cast<double>(correct_0 + correct_1) / static_cast<double>(total()) : 0.0;
  }
  bool operator==(const Confusion&) const = default;
};

struct MetricsReport {
  std::string kind;
  std::size_t use_bins = 0;
  std::uint64_t shots = 0;
  std::vector<double> accuracy;  ///< per qubit, marginal bit match
  double cumulative = 0.0;       ///< geometric mean of `accuracy`
  std::vector<Confusion> confusion;

  bool operator==(const MetricsReport&) const = default;
};

/// (prod F_k)^(1/N), computed in log space.
double cumulative_accuracy(std::span<const double> per_qubit);

/// Scores predicted basis states against prepared ones.
MetricsReport score(std::span<const std::uint32_t> prepared, std::span<const std::uint32_t> predicted, int num_qubits,
                    std::string kind = {}, std::size_t use_bins = 0);

struct EvalOptions {
  pipeline::Precision precision = pipeline::Precision::floating;
  unsigned threads = 1;
};

/// Discriminates every listed shot with the first `use_bins` bins.
/// Throws EmptyEvaluation for an empty shot list.
MetricsReport evaluate(const pipeline::Pipeline& p, const LabeledDataset& ds, std::span<const std::size_t> shots,
                       std::size_t use_bins, const EvalOptions& options = {});

struct DurationSweep {
  std::vector<MetricsReport> rows;
  double epsilon = 0.005;
  double reference_cumulative = 0.0;          ///< at the full trained window
  std::optional<std::size_t> saturation_bins;  ///< shortest duration within epsilon of the reference
};

DurationSweep sweep_duration(const pipeline::Pipeline& p, const LabeledDataset& ds, std::span<const std::size_t> shots,
                             std::span<const std::size_t> durations, double epsilon = 0.005,
                             const EvalOptions& options = {});

struct TrainSizeRow {
  std::size_t size = 0;
  MetricsReport report;
};

/// Shuffled training subset of `size` shots, returned in ascending order so
/// the full size reproduces `train` exactly. Throws InsufficientData if any
/// qubit is left with fewer than 2 shots of either prepared value.
std::vector<std::size_t> training_subset(const LabeledDataset& ds, std::span<const std::size_t> train,
                                         std::size_t size, std::uint64_t seed);

std::vector<TrainSizeRow> sweep_train_size(pipeline::Kind kind, const LabeledDataset& ds, const DatasetSplit& split,
                                           std::span<const std::size_t> sizes, std::uint64_t seed,
                                           const pipeline::FitConfig& config, const EvalOptions& options = {});

nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

/// Columns: kind,bins,qubit,accuracy,correct_0,wrong_0,correct_1,wrong_1,shots.
/// The final row of each report has qubit "all" and the cumulative accuracy.
std::string csv_header();
std::string to_csv_rows(const MetricsReport& r);
std::vector<MetricsReport> reports_from_csv(const std::string& csv);

nlohmann::json to_json(const DurationSweep& s);
nlohmann::json to_json(std::span<const TrainSizeRow> rows);

}  // namespace qread::metrics
