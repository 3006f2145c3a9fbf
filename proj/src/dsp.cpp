#include "qread/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qread/error.hpp"

namespace qread::dsp {

namespace {

void check_window(std::size_t k, std::size_t len) {
  if (k < 1 || k > len)
    throw Error(ErrorCode::InvalidWindow,
                "window " + std::to_string(k) + " outside [1, " + std::to_string(len) + "]");
}

std::size_t common_length(std::span<const TraceView> a, std::span<const TraceView> b) {
  const std::size_t len = a.front().size();
  for (auto set : {a, b})
    for (const auto& tr : set)
      if (tr.i.size() != len || tr.q.size() != len)
        throw Error(ErrorCode::LengthMismatch, "training traces differ in length");
  return len;
}

}  // namespace

Trace boxcar(TraceView trace, std::size_t k, bool decimate) {
  const std::size_t len = trace.size();
  check_window(k, len);
  if (decimate) {
    const std::size_t out_len = len / k;
    Trace out(out_len, trace.dt_ns * static_cast<double>(k));
    for (std::size_t w = 0; w < out_len; ++w) {
      double si = 0.0;
      double sq = 0.0;
      for (std::size_t t = w * k; t < (w + 1) * k; ++t) {
        si += trace.i[t];
        sq += trace.q[t];
      }
      out.i[w] = si / static_cast<double>(k);
      out.q[w] = sq / static_cast<double>(k);
    }
    return out;
  }
  // Window sums are recomputed from scratch every k bins to bound the
  // drift of the running sum.
  Trace out(len, trace.dt_ns);
  double si = 0.0;
  double sq = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    if (t % k == 0 && t >= k) {
      si = 0.0;
      sq = 0.0;
      for (std::size_t u = t + 1 - k; u < t; ++u) {
        si += trace.i[u];
        sq += trace.q[u];
      }
    } else if (t >= k) {
      si -= trace.i[t - k];
      sq -= trace.q[t - k];
    }
    si += trace.i[t];
    sq += trace.q[t];
    const double n = static_cast<double>(std::min(t + 1, k));
    out.i[t] = si / n;
    out.q[t] = sq / n;
  }
  return out;
}

Trace demultiplex(TraceView composite, double if_freq_mhz, std::size_t boxcar_len) {
  const std::size_t len = composite.size();
  check_window(boxcar_len, len);
  Trace mixed(len, composite.dt_ns);
  const double w = 2.0 * std::numbers::pi * if_freq_mhz * 1e-3 * composite.dt_ns;
  for (std::size_t t = 0; t < len; ++t) {
    const double ph = w * static_cast<double>(t);
    const double c = std::cos(ph);
    const double s = std::sin(ph);
    // (I + iQ) * (cos - i sin)
    mixed.i[t] = composite.i[t] * c + composite.q[t] * s;
    mixed.q[t] = composite.q[t] * c - composite.i[t] * s;
  }
  return boxcar(mixed, boxcar_len, false);
}

double MatchedFilter::energy(std::size_t bins) const {
  double e = 0.0;
  for (std::size_t t = 0; t < bins; ++t) e += envelope_i[t] * envelope_i[t] + envelope_q[t] * envelope_q[t];
  return e;
}

MatchedFilter fit_envelope(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1) {
  if (traces_0.size() < 2 || traces_1.size() < 2)
    throw Error(ErrorCode::InsufficientData, "matched filter needs at least 2 traces per class");
  const std::size_t len = common_length(traces_0, traces_1);
  if (len == 0) throw Error(ErrorCode::EmptyTrace, "training traces are empty");

  std::vector<double> m0i(len), m0q(len), m1i(len), m1q(len), var(len);
  auto accumulate_mean = [len](std::span<const TraceView> set, std::vector<double>& mi, std::vector<double>& mq) {
    for (const auto& tr : set)
      for (std::size_t t = 0; t < len; ++t) {
        mi[t] += tr.i[t];
        mq[t] += tr.q[t];
      }
    const double n = static_cast<double>(set.size());
    for (std::size_t t = 0; t < len; ++t) {
      mi[t] /= n;
      mq[t] /= n;
    }
  };
  accumulate_mean(traces_0, m0i, m0q);
  accumulate_mean(traces_1, m1i, m1q);

  auto accumulate_var = [len, &var](std::span<const TraceView> set, const std::vector<double>& mi,
                                    const std::vector<double>& mq) {
    for (const auto& tr : set)
      for (std::size_t t = 0; t < len; ++t) {
        const double di = tr.i[t] - mi[t];
        const double dq = tr.q[t] - mq[t];
        var[t] += di * di + dq * dq;
      }
  };
  accumulate_var(traces_0, m0i, m0q);
  accumulate_var(traces_1, m1i, m1q);
  const double dof = static_cast<double>(traces_0.size() + traces_1.size() - 2);

  double max_var = 0.0;
  double mean_var = 0.0;
  double max_diff = 0.0;
  double scale = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    var[t] /= dof;
    max_var = std::max(max_var, var[t]);
    mean_var += var[t] / static_cast<double>(len);
    max_diff = std::max(max_diff, std::hypot(m1i[t] - m0i[t], m1q[t] - m0q[t]));
    scale = std::max({scale, std::hypot(m0i[t], m0q[t]), std::hypot(m1i[t], m1q[t])});
  }
  scale = std::max(scale, std::sqrt(max_var));
  if (max_diff <= 1e-12 * scale || max_diff == 0.0)
    throw Error(ErrorCode::DegenerateClasses, "class means coincide in every time bin");

  MatchedFilter mf;
  mf.envelope_i.resize(len);
  mf.envelope_q.resize(len);
  // Noiseless classes have no variance to weight by; the mean difference
  // itself is then the optimal projection.
  const bool noiseless = max_var < 1e-30;
  const double floor = std::max(1e-30, 1e-9 * mean_var);
  for (std::size_t t = 0; t < len; ++t) {
    const double v = noiseless ? 1.0 : std::max(var[t], floor);
    mf.envelope_i[t] = (m1i[t] - m0i[t]) / v;
    mf.envelope_q[t] = (m1q[t] - m0q[t]) / v;
  }
  return mf;
}

MatchedFilter train_mf(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1) {
  MatchedFilter mf = fit_envelope(traces_0, traces_1);
  std::vector<double> s0, s1;
  s0.reserve(traces_0.size());
  s1.reserve(traces_1.size());
  for (const auto& tr : traces_0) s0.push_back(apply_mf(mf, tr));
  for (const auto& tr : traces_1) s1.push_back(apply_mf(mf, tr));
  mf.threshold = select_threshold(s0, s1);
  return mf;
}

double apply_mf(const MatchedFilter& mf, TraceView trace, std::size_t use_bins) {
  const std::size_t limit = std::min(trace.size(), mf.trained_on_bins());
  if (use_bins < 1 || use_bins > limit)
    throw Error(ErrorCode::InvalidWindow,
                "use_bins " + std::to_string(use_bins) + " outside [1, " + std::to_string(limit) + "]");
  double acc = 0.0;
  for (std::size_t t = 0; t < use_bins; ++t) acc += mf.envelope_i[t] * trace.i[t] + mf.envelope_q[t] * trace.q[t];
  if (use_bins == mf.trained_on_bins()) return acc;
  const double partial = mf.energy(use_bins);
  if (partial <= 0.0) return 0.0;
  return acc * (mf.energy(mf.trained_on_bins()) / partial);
}

double select_threshold(std::span<const double> scores_0, std::span<const double> scores_1) {
  if (scores_0.empty() || scores_1.empty())
    throw Error(ErrorCode::InsufficientData, "threshold search needs scores from both classes");
  struct Scored {
    double value;
    int label;
  };
  std::vector<Scored> all;
  all.reserve(scores_0.size() + scores_1.size());
  for (double v : scores_0) all.push_back({v, 0});
  for (double v : scores_1) all.push_back({v, 1});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.value < b.value; });

  const double n0 = static_cast<double>(scores_0.size());
  const double n1 = static_cast<double>(scores_1.size());
  // Cut below everything: all predicted 1.
  double best_score = 0.5;
  double best_cut = all.front().value - 1.0;
  std::size_t below0 = 0;
  std::size_t below1 = 0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    (all[k].label == 0 ? below0 : below1) += 1;
    if (k + 1 < all.size() && all[k + 1].value == all[k].value) continue;
    const double balanced = 0.5 * (static_cast<double>(below0) / n0 + (n1 - static_cast<double>(below1)) / n1);
    if (balanced > best_score) {
      best_score = balanced;
      best_cut = k + 1 < all.size() ? 0.5 * (all[k].value + all[k + 1].value) : all[k].value + 1.0;
    }
  }
  return best_cut;
}

int CentroidDiscriminator::classify(TraceView trace) const {
  const IQPoint m = mean_trace_value(trace);
  return distance(m, centroid_1) < distance(m, centroid_0) ? 1 : 0;
}

CentroidDiscriminator train_centroid(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1) {
  if (traces_0.empty() || traces_1.empty())
    throw Error(ErrorCode::InsufficientData, "centroid discriminator needs traces from both classes");
  auto centroid = [](std::span<const TraceView> set) {
    IQPoint c;
    for (const auto& tr : set) {
      const IQPoint m = mean_trace_value(tr);
      c.i += m.i;
      c.q += m.q;
    }
    c.i /= static_cast<double>(set.size());
    c.q /= static_cast<double>(set.size());
    return c;
  };
  return {centroid(traces_0), centroid(traces_1)};
}

nlohmann::json to_json(const MatchedFilter& mf) {
  return {{"kind", mf.kind == FilterKind::relaxation ? "relaxation" : "state"},
          {"trained_on_bins", mf.trained_on_bins()},
          {"threshold", mf.threshold},
          {"envelope_i", mf.envelope_i},
          {"envelope_q", mf.envelope_q}};
}

MatchedFilter matched_filter_from_json(const nlohmann::json& j) {
  try {
    MatchedFilter mf;
    mf.kind = j.at("kind").get<std::string>() == "relaxation" ? FilterKind::relaxation : FilterKind::state;
    mf.threshold = j.at("threshold").get<double>();
    mf.envelope_i = j.at("envelope_i").get<std::vector<double>>();
    mf.envelope_q = j.at("envelope_q").get<std::vector<double>>();
    if (mf.envelope_i.size() != mf.envelope_q.size() ||
        mf.envelope_i.size() != j.at("trained_on_bins").get<std::size_t>() || mf.envelope_i.empty())
      throw Error(ErrorCode::FormatError, "matched filter envelope lengths inconsistent");
    return mf;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("matched filter JSON: ") + e.what());
  }
}

}  // namespace qread::dsp
