#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qread {

struct IQPoint {
  double i = 0.0;
  double q = 0.0;
};

double distance(IQPoint a, IQPoint b) noexcept;

/// Non-owning view of one two-channel time series.
struct TraceView {
  std::span<const double> i;
  std::span<const double> q;
  double dt_ns = 1.0;

  std::size_t size() const noexcept { return i.size(); }
  TraceView first(std::size_t bins) const { return {i.first(bins), q.first(bins), dt_ns}; }
};

/// One shot's I/Q time series for a single qubit or a composite feedline.
struct Trace {
  std::vector<double> i;
  std::vector<double> q;
  double dt_ns = 1.0;

  Trace() = default;
  Trace(std::size_t bins, double dt) : i(bins, 0.0), q(bins, 0.0), dt_ns(dt) {}
  Trace(std::vector<double> i_samples, std::vector<double> q_samples, double dt)
      : i(std::move(i_samples)), q(std::move(q_samples)), dt_ns(dt) {}

  std::size_t size() const noexcept { return i.size(); }
  TraceView view() const noexcept { return {i, q, dt_ns}; }
  operator TraceView() const noexcept { return view(); }
};

/// Per-channel arithmetic mean over all time bins.
/// Throws EmptyTrace for a zero-length trace, LengthMismatch if I and Q differ.
IQPoint mean_trace_value(TraceView trace);

enum class Layout { demultiplexed, composite };

enum class EventKind { none, relaxation, excitation };

struct TransitionEvent {
  EventKind kind = EventKind::none;
  double time_ns = 0.0;

  bool operator==(const TransitionEvent&) const = default;
};

/// Shots grouped by prepared basis state. Samples are held as 32-bit floats
/// in shot-major, trace-major, channel-major (I then Q), time-minor order,
/// which is also the on-disk blob order.
///
/// In the demultiplexed layout a shot holds one trace per qubit; in the
/// composite layout it holds a single feedline trace and `if_freq_mhz`
/// records the tone of each qubit.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(int num_qubits, Layout layout, std::size_t num_bins, double dt_ns,
                 std::vector<std::uint32_t> states, std::vector<float> samples,
                 std::vector<TransitionEvent> ground_truth = {},
                 std::vector<double> if_freq_mhz = {});

  int num_qubits() const noexcept { return num_qubits_; }
  Layout layout() const noexcept { return layout_; }
  std::size_t num_bins() const noexcept { return num_bins_; }
  double dt_ns() const noexcept { return dt_ns_; }
  std::size_t num_shots() const noexcept { return states_.size(); }
  std::size_t num_states() const noexcept { return std::size_t{1} << num_qubits_; }
  std::size_t traces_per_shot() const noexcept {
    return layout_ == Layout::demultiplexed ? static_cast<std::size_t>(num_qubits_) : 1;
  }
  const std::vector<double>& if_freq_mhz() const noexcept { return if_freq_mhz_; }

  std::uint32_t state(std::size_t shot) const { return states_.at(shot); }
  const std::vector<std::uint32_t>& states() const noexcept { return states_; }

  /// Prepared bit of `qubit` (0-based; qubit 0 is the least significant bit).
  int prepared_bit(std::size_t shot, int qubit) const { return static_cast<int>((state(shot) >> qubit) & 1u); }

  /// Copies one stored trace out at 64-bit precision.
  Trace trace(std::size_t shot, std::size_t index) const;
  std::span<const float> raw_i(std::size_t shot, std::size_t index) const;
  std::span<const float> raw_q(std::size_t shot, std::size_t index) const;

  bool has_ground_truth() const noexcept { return !ground_truth_.empty(); }
  const TransitionEvent& ground_truth(std::size_t shot, int qubit) const;
  const std::vector<TransitionEvent>& ground_truth_table() const noexcept { return ground_truth_; }

  std::span<const float> samples() const noexcept { return samples_; }

 private:
  std::size_t offset(std::size_t shot, std::size_t index) const;

  int num_qubits_ = 0;
  Layout layout_ = Layout::demultiplexed;
  std::size_t num_bins_ = 0;
  double dt_ns_ = 1.0;
  std::vector<std::uint32_t> states_;
  std::vector<float> samples_;
  std::vector<TransitionEvent> ground_truth_;
  std::vector<double> if_freq_mhz_;
};

struct SplitRatios {
  double train = 0.195;
  double validation = 0.105;
  double test = 0.70;
};

/// Index partition of a dataset into train / validation / test, stratified
/// by prepared basis state. Index vectors are sorted ascending.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  /// counts[state] = {train, validation, test}
  std::vector<std::array<std::size_t, 3>> per_state_counts;
};

/// Largest-remainder apportionment of `total` items over `ratios`.
/// Ties in the remainder go to the earlier slot.
std::array<std::size_t, 3> apportion(std::size_t total, const SplitRatios& ratios);

/// Per-state shuffled split. Deterministic for a given seed.
DatasetSplit split_dataset(const LabeledDataset& ds, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace qread
