#pragma once

// Class-wise distribution bookkeeping and transformation.
//
// Each segmenter owns an AlignmentState holding two K x K matrices. Row i of
// the labeled matrix tracks, by exponential moving average, the mean
// prediction over labeled pixels whose ground truth is i; row i of the
// unlabeled matrix does the same over unlabeled pixels whose raw argmax is i.
// A prediction whose raw argmax is i is aligned by
//
//   F' = normalize(F * labeled_i^tau_i / unlabeled_i),  tau_i = 1 - labeled_ii
//
// and its pseudo-label is kept for the cross loss only when the confidence
// exceeds the class threshold unlabeled_ii.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coda/types.hpp"

namespace coda {

inline constexpr double kDefaultEmaMomentum = 0.99;

struct AlignmentState {
  DistributionMatrix labeled;
  DistributionMatrix unlabeled;
  double alpha = kDefaultEmaMomentum;
  // Number of unlabeled-row updates that took the empty-class fallback.
  std::uint64_t fallback_count = 0;

  static AlignmentState uniform(std::size_t classes,
                                double alpha = kDefaultEmaMomentum);

  std::size_t classes() const { return labeled.classes(); }

  friend bool operator==(const AlignmentState&,
                         const AlignmentState&) = default;
};

/// Per-class mean prediction and pixel count for a batch.
struct ClassConditionalMeans {
  std::size_t classes = 0;
  std::vector<double> means;  // classes x classes, row i = mean over class i
  std::vector<std::size_t> counts;

  std::span<const double> row(std::size_t i) const {
    return {means.data() + i * classes, classes};
  }
};

ClassConditionalMeans class_conditional_means(const ProbabilityMap& probs,
                                              const LabelMap& labels);

/// EMA update of labeled row i. Skipped when class i is absent.
void update_labeled_row(AlignmentState& state, const ProbabilityMap& probs,
                        const LabelMap& labels, std::size_t cls);
void update_labeled_row(AlignmentState& state,
                        const ClassConditionalMeans& stats, std::size_t cls);

/// EMA update of unlabeled row i from pixels whose pseudo-label is i. When
/// no pixel carries i the row is rebuilt from the labeled row scaled by the
/// mean componentwise ratio unlabeled_i / labeled_i; after renormalization
/// that is the labeled row itself. Returns true when the fallback ran.
bool update_unlabeled_row(AlignmentState& state, const ProbabilityMap& probs,
                          const LabelMap& pseudo_labels, std::size_t cls);
bool update_unlabeled_row(AlignmentState& state,
                          const ClassConditionalMeans& stats, std::size_t cls);

/// All rows in class order.
void update_labeled(AlignmentState& state, const ProbabilityMap& probs,
                    const LabelMap& labels);
void update_unlabeled(AlignmentState& state, const ProbabilityMap& probs,
                      const LabelMap& pseudo_labels);

double temperature(const AlignmentState& state, std::size_t cls);
double dynamic_threshold(const AlignmentState& state, std::size_t cls);

/// Writes normalize(pixel * labeled_row^tau / unlabeled_row) into `out`.
void align_prediction(std::span<const double> pixel,
                      std::span<const double> labeled_row,
                      std::span<const double> unlabeled_row, double tau,
                      std::span<double> out);

std::vector<double> align_prediction(const AlignmentState& state,
                                     std::span<const double> pixel,
                                     std::size_t cls);

enum class ConfidenceSource { raw, aligned };

/// Dynamic uses the state's diagonal; a static value applies to every class.
struct ThresholdRule {
  std::optional<double> static_value;

  static ThresholdRule dynamic() { return {}; }
  static ThresholdRule fixed(double v) { return {v}; }
  bool is_dynamic() const { return !static_value.has_value(); }

  friend bool operator==(const ThresholdRule&, const ThresholdRule&) = default;
};

struct AlignedMap {
  ProbabilityMap aligned;
  LabelMap pseudo_labels;
  std::vector<double> confidence;
  std::vector<std::uint8_t> mask;
};

/// Aligns every pixel with the row picked by its raw argmax, labels it with
/// the aligned argmax and masks it by confidence > threshold(label).
AlignedMap align_map(const AlignmentState& state, const ProbabilityMap& map,
                     ThresholdRule rule = ThresholdRule::dynamic(),
                     ConfidenceSource source = ConfidenceSource::raw);

/// Confidence mask over raw predictions with no alignment.
AlignedMap threshold_map(const AlignmentState& state,
                         const ProbabilityMap& map, ThresholdRule rule);

/// Single overall distribution pair, for the plain distribution-alignment
/// baseline.
struct NaiveDAState {
  std::vector<double> labeled_dist;
  std::vector<double> unlabeled_dist;
  double alpha = kDefaultEmaMomentum;

  static NaiveDAState uniform(std::size_t classes,
                              double alpha = kDefaultEmaMomentum);
};

/// EMA of the batch mean prediction into unlabeled_dist.
void update_naive_unlabeled(NaiveDAState& state, const ProbabilityMap& probs);

ProbabilityMap naive_da_align(const NaiveDAState& state,
                              const ProbabilityMap& map);

/// One row per line, space separated, 17 significant digits; labeled matrix
/// first, '#' lines are metadata.
std::string serialize_alignment(const AlignmentState& state);
AlignmentState parse_alignment(const std::string& text);

}  // namespace coda
