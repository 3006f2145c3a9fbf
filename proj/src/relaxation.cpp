#include "qread/relaxation.hpp"

#include <algorithm>

#include "qread/error.hpp"

namespace qread::relax {

namespace {

IQPoint centroid(const std::vector<IQPoint>& points) {
  IQPoint c;
  for (const auto& p : points) {
    c.i += p.i;
    c.q += p.q;
  }
  c.i /= static_cast<double>(points.size());
  c.q /= static_cast<double>(points.size());
  return c;
}

std::vector<IQPoint> mtvs(std::span<const TraceView> traces) {
  std::vector<IQPoint> out;
  out.reserve(traces.size());
  for (const auto& tr : traces) out.push_back(mean_trace_value(tr));
  return out;
}

}  // namespace

RelaxationLabelReport label_relaxations(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1) {
  if (traces_0.size() < 2 || traces_1.size() < 2)
    throw Error(ErrorCode::InsufficientData, "relaxation labeling needs at least 2 traces per class");
  const auto mean_0 = mtvs(traces_0);
  const auto mean_1 = mtvs(traces_1);

  RelaxationLabelReport report;
  report.centroid_0 = centroid(mean_0);
  report.centroid_1 = centroid(mean_1);
  const double gap = distance(report.centroid_0, report.centroid_1);
  if (gap < 1e-12) throw Error(ErrorCode::DegenerateCentroids, "class centroids coincide");
  report.radius = gap / 2.0;
  for (std::size_t k = 0; k < mean_1.size(); ++k)
    if (distance(mean_1[k], report.centroid_0) <= report.radius) report.relax_indices.push_back(k);
  return report;
}

dsp::MatchedFilter train_rmf(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1,
                             const RelaxationLabelReport& report, std::size_t min_relax) {
  const std::size_t needed = std::max<std::size_t>(min_relax, 2);
  if (report.relax_indices.size() < needed)
    throw Error(ErrorCode::InsufficientRelaxations, std::to_string(report.relax_indices.size()) +
                                                        " relaxation traces, need " + std::to_string(needed));
  std::vector<TraceView> relaxed;
  relaxed.reserve(report.relax_indices.size());
  for (std::size_t k : report.relax_indices) relaxed.push_back(traces_1[k]);

  dsp::MatchedFilter rmf = dsp::fit_envelope(traces_0, relaxed);
  rmf.kind = dsp::FilterKind::relaxation;
  // Recorded for audit only; downstream consumers use the raw output.
  std::vector<double> s0, s1;
  for (const auto& tr : traces_0) s0.push_back(dsp::apply_mf(rmf, tr));
  for (const auto& tr : relaxed) s1.push_back(dsp::apply_mf(rmf, tr));
  rmf.threshold = dsp::select_threshold(s0, s1);
  return rmf;
}

LabelQuality score_labels(const RelaxationLabelReport& report, std::span<const TransitionEvent> truth_1,
                          double horizon_ns) {
  LabelQuality q;
  auto is_true = [&](const TransitionEvent& ev) {
    return ev.kind == EventKind::relaxation && ev.time_ns <= horizon_ns;
  };
  for (const auto& ev : truth_1)
    if (is_true(ev)) ++q.true_events;
  std::size_t clean = 0;
  for (std::size_t k : report.relax_indices) {
    const auto& ev = truth_1[k];
    if (is_true(ev)) ++q.hits;
    if (ev.kind != EventKind::relaxation) ++clean;
  }
  q.flagged = report.relax_indices.size();
  q.recall = q.true_events ? static_cast<double>(q.hits) / static_cast<double>(q.true_events) : 0.0;
  q.precision = q.flagged ? static_cast<double>(q.hits) / static_cast<double>(q.flagged) : 0.0;
  q.contamination = q.flagged ? static_cast<double>(clean) / static_cast<double>(q.flagged) : 0.0;
  return q;
}

nlohmann::json to_json(const RelaxationLabelReport& report) {
  return {{"centroid_0", {report.centroid_0.i, report.centroid_0.q}},
          {"centroid_1", {report.centroid_1.i, report.centroid_1.q}},
          {"radius", report.radius},
          {"relax_count", report.relax_indices.size()},
          {"relax_indices", report.relax_indices}};
}

}  // namespace qread::relax
