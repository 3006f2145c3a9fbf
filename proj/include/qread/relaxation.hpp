#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "qread/dsp.hpp"
#include "qread/trace.hpp"

namespace qread::relax {

/// Outcome of the centroid-radius labeling for one qubit.
struct RelaxationLabelReport {
  IQPoint centroid_0;
  IQPoint centroid_1;
  double radius = 0.0;                    ///< half the centroid distance
  std::vector<std::size_t> relax_indices;  ///< ascending indices into the class-1 traces
};

/// Flags class-1 traces whose mean trace value lies within `radius` of the
/// class-0 centroid (boundary inclusive). Needs at least two traces per
/// class; throws DegenerateCentroids when the centroids coincide.
RelaxationLabelReport label_relaxations(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1);

inline constexpr std::size_t kDefaultMinRelax = 20;

/// Relaxation matched filter: class 1 is the flagged relaxation set, class 0
/// the ground-labeled traces. Throws InsufficientRelaxations below
/// `min_relax` flagged traces.
dsp::MatchedFilter train_rmf(std::span<const TraceView> traces_0, std::span<const TraceView> traces_1,
                             const RelaxationLabelReport& report, std::size_t min_relax = kDefaultMinRelax);

/// Agreement of the flagged set with simulator ground truth. A true event is
/// an in-window relaxation at time <= `horizon_ns`.
struct LabelQuality {
  std::size_t true_events = 0;
  std::size_t flagged = 0;
  std::size_t hits = 0;
  double recall = 0.0;
  double precision = 0.0;
  /// Fraction of flagged traces with no in-window relaxation at all.
  double contamination = 0.0;
};

LabelQuality score_labels(const RelaxationLabelReport& report, std::span<const TransitionEvent> truth_1,
                          double horizon_ns);

nlohmann::json to_json(const RelaxationLabelReport& report);

}  // namespace qread::relax
