#include "qread/trace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qread/error.hpp"
#include "qread/rng.hpp"

namespace qread {

double distance(IQPoint a, IQPoint b) noexcept { return std::hypot(a.i - b.i, a.q - b.q); }

IQPoint mean_trace_value(TraceView trace) {
  if (trace.i.size() != trace.q.size())
    throw Error(ErrorCode::LengthMismatch, "I and Q channels differ in length");
  if (trace.i.empty()) throw Error(ErrorCode::EmptyTrace, "mean of an empty trace");
  double si = 0.0;
  double sq = 0.0;
  for (std::size_t t = 0; t < trace.i.size(); ++t) {
    si += trace.i[t];
    sq += trace.q[t];
  }
  const double n = static_cast<double>(trace.i.size());
  return {si / n, sq / n};
}

LabeledDataset::LabeledDataset(int num_qubits, Layout layout, std::size_t num_bins, double dt_ns,
                               std::vector<std::uint32_t> states, std::vector<float> samples,
                               std::vector<TransitionEvent> ground_truth, std::vector<double> if_freq_mhz)
    : num_qubits_(num_qubits),
      layout_(layout),
      num_bins_(num_bins),
      dt_ns_(dt_ns),
      states_(std::move(states)),
      samples_(std::move(samples)),
      ground_truth_(std::move(ground_truth)),
      if_freq_mhz_(std::move(if_freq_mhz)) {
  if (num_qubits_ < 1 || num_qubits_ > 16)
    throw Error(ErrorCode::FormatError, "num_qubits must be in [1, 16], got " + std::to_string(num_qubits_));
  if (num_bins_ == 0) throw Error(ErrorCode::FormatError, "num_bins must be positive");
  if (!(dt_ns_ > 0.0) || !std::isfinite(dt_ns_)) throw Error(ErrorCode::FormatError, "dt_ns must be positive");
  const std::size_t per_shot = traces_per_shot() * 2 * num_bins_;
  if (samples_.size() != states_.size() * per_shot)
    throw Error(ErrorCode::PayloadTruncated, "expected " + std::to_string(states_.size() * per_shot) +
                                                 " samples, got " + std::to_string(samples_.size()));
  for (std::uint32_t s : states_)
    if (s >= num_states())
      throw Error(ErrorCode::FormatError, "basis state " + std::to_string(s) + " out of range");
  if (!ground_truth_.empty() && ground_truth_.size() != states_.size() * static_cast<std::size_t>(num_qubits_))
    throw Error(ErrorCode::FormatError, "ground_truth table size does not match shots x qubits");
  if (layout_ == Layout::composite && if_freq_mhz_.size() != static_cast<std::size_t>(num_qubits_))
    throw Error(ErrorCode::FormatError, "composite layout requires one IF frequency per qubit");
}

std::size_t LabeledDataset::offset(std::size_t shot, std::size_t index) const {
  if (shot >= num_shots() || index >= traces_per_shot())
    throw Error(ErrorCode::InvalidArgument, "trace index out of range");
  return (shot * traces_per_shot() + index) * 2 * num_bins_;
}

std::span<const float> LabeledDataset::raw_i(std::size_t shot, std::size_t index) const {
  return std::span<const float>(samples_).subspan(offset(shot, index), num_bins_);
}

std::span<const float> LabeledDataset::raw_q(std::size_t shot, std::size_t index) const {
  return std::span<const float>(samples_).subspan(offset(shot, index) + num_bins_, num_bins_);
}

Trace LabeledDataset::trace(std::size_t shot, std::size_t index) const {
  const auto ri = raw_i(shot, index);
  const auto rq = raw_q(shot, index);
  Trace out;
  out.dt_ns = dt_ns_;
  out.i.assign(ri.begin(), ri.end());
  out.q.assign(rq.begin(), rq.end());
  return out;
}

const TransitionEvent& LabeledDataset::ground_truth(std::size_t shot, int qubit) const {
  if (ground_truth_.empty()) throw Error(ErrorCode::InvalidArgument, "dataset carries no ground truth");
  return ground_truth_.at(shot * static_cast<std::size_t>(num_qubits_) + static_cast<std::size_t>(qubit));
}

std::array<std::size_t, 3> apportion(std::size_t total, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = r[k] * static_cast<double>(total);
    // Guard against 9749.999999 style representation error before flooring.
    const double rounded = std::round(exact);
    const double whole = std::abs(exact - rounded) < 1e-9 ? rounded : std::floor(exact);
    counts[k] = static_cast<std::size_t>(whole);
    remainder[k] = exact - whole;
    assigned += counts[k];
  }
  while (assigned < total) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (remainder[k] > remainder[best]) best = k;
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  while (assigned > total) {  // only reachable through rounding of near-integers
    std::size_t worst = 2;
    while (counts[worst] == 0) --worst;
    --counts[worst];
    --assigned;
  }
  return counts;
}

DatasetSplit split_dataset(const LabeledDataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (!(ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0) || std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidRatios, "split ratios must be positive and sum to 1");

  std::vector<std::vector<std::size_t>> by_state(ds.num_states());
  for (std::size_t shot = 0; shot < ds.num_shots(); ++shot) by_state[ds.state(shot)].push_back(shot);

  DatasetSplit split;
  split.per_state_counts.resize(ds.num_states());
  for (std::size_t s = 0; s < by_state.size(); ++s) {
    auto& shots = by_state[s];
    if (shots.size() < 3)
      throw Error(ErrorCode::InsufficientData,
                  "basis state " + std::to_string(s) + " has " + std::to_string(shots.size()) + " shots (need >= 3)");
    SplitMix64 rng(derive_seed(seed, {0x5350u, s}));
    shuffle(shots, rng);
    const auto counts = apportion(shots.size(), ratios);
    split.per_state_counts[s] = counts;
    auto it = shots.begin();
    split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(counts[0]));
    it += static_cast<std::ptrdiff_t>(counts[0]);
    split.validation.insert(split.validation.end(), it, it + static_cast<std::ptrdiff_t>(counts[1]));
    it += static_cast<std::ptrdiff_t>(counts[1]);
    split.test.insert(split.test.end(), it, shots.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace qread
