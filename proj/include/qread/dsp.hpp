#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qread/trace.hpp"

namespace qread::dsp {

/// Moving average of width k. Without decimation the output has the input
/// length and bin t averages [max(0, t-k+1), t] (edge bins use the samples
/// available). With decimation, one sample per full window of k bins.
Trace boxcar(TraceView trace, std::size_t k, bool decimate);

/// Digital down-conversion of the complex signal I + iQ by exp(-i 2 pi f t)
/// at t_k = k * dt, followed by a same-rate causal boxcar. Output bin t
/// depends only on input bins <= t, so truncating before or after
/// demultiplexing gives the same samples.
Trace demultiplex(TraceView composite, double if_freq_mhz, std::size_t boxcar_len);

enum class FilterKind { state, relaxation };

/// Complex matched-filter envelope. The output for a trace x is
/// Re<e, x> = sum_t e_i(t) x_i(t) + e_q(t) x_q(t).
struct MatchedFilter {
  std::vector<double> envelope_i;
  std::vector<double> envelope_q;
  double threshold = 0.0;
  FilterKind kind = FilterKind::state;

  std::size_t trained_on_bins() const noexcept { return envelope_i.size(); }
  /// Envelope energy over the first `bins` bins.
  double energy(std::size_t bins) const;
};

/// Per-bin mean difference (class 1 minus class 0) over pooled variance.
/// The threshold maximizes balanced accuracy over the training outputs.
MatchedFilter train_mf(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1);

/// Envelope only (no threshold search); shared by train_mf and the
/// relaxation filter.
MatchedFilter fit_envelope(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1);

/// Projection on the first `use_bins` bins, rescaled by
/// energy(full) / energy(use_bins) so truncated outputs stay on the
/// full-window scale. use_bins == trained_on_bins is the plain dot product.
double apply_mf(const MatchedFilter& mf, TraceView trace, std::size_t use_bins);
inline double apply_mf(const MatchedFilter& mf, TraceView trace) { return apply_mf(mf, trace, mf.trained_on_bins()); }

/// Midpoint-of-adjacent-values cut with the best balanced accuracy for the
/// rule "score > threshold means class 1". Ties resolve to the lowest cut.
double select_threshold(std::span<const double> scores_0, std::span<const double> scores_1);

/// Nearest-centroid discriminator on mean trace values.
struct CentroidDiscriminator {
  IQPoint centroid_0;
  IQPoint centroid_1;

  int classify(TraceView trace) const;
  int classify(TraceView trace, std::size_t use_bins) const { return classify(trace.first(use_bins)); }
};

CentroidDiscriminator train_centroid(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1);

nlohmann::json to_json(const MatchedFilter& mf);
MatchedFilter matched_filter_from_json(const nlohmann::json& j);

}  // namespace qread::dsp
