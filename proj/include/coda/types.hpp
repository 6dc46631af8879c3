#pragma once

// Shared data vocabulary: probability fields, label fields, per-class
// distribution matrices, pixel features and dataset splits. Pixels are stored
// row-major everywhere, with the per-pixel vector contiguous.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace coda {

/// Smallest entry a stored distribution row may hold.
inline constexpr double kSimplexFloor = 1e-8;
/// Tolerance on a probability vector's sum.
inline constexpr double kSimplexTolerance = 1e-9;

class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(std::size_t height, std::size_t width, std::size_t classes,
                 std::vector<double> values);

  static ProbabilityMap uniform(std::size_t height, std::size_t width,
                                std::size_t classes);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t classes() const { return classes_; }
  std::size_t pixels() const { return height_ * width_; }

  std::span<const double> pixel(std::size_t p) const {
    return {values_.data() + p * classes_, classes_};
  }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> values_;
};

class LabelMap {
 public:
  LabelMap() = default;
  /// Throws InvalidLabelError when a label is outside [0, classes).
  LabelMap(std::size_t height, std::size_t width, std::size_t classes,
           std::vector<std::int32_t> labels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t classes() const { return classes_; }
  std::size_t pixels() const { return height_ * width_; }

  std::int32_t at(std::size_t p) const { return labels_[p]; }
  std::int32_t at(std::size_t row, std::size_t col) const {
    return labels_[row * width_ + col];
  }
  std::span<const std::int32_t> labels() const { return labels_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::int32_t> labels_;
};

struct ProbabilityReport {
  bool valid = false;
  bool in_range = false;
  double max_simplex_deviation = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;
};

ProbabilityReport validate_probability_map(const ProbabilityMap& map);

/// Throws InvalidLabelError if any label is >= classes.
ProbabilityMap one_hot(const LabelMap& labels, std::size_t classes);

/// Ties go to the lowest class index.
LabelMap argmax_labels(const ProbabilityMap& map);

std::size_t argmax(std::span<const double> values);

/// Clamp every entry to at least `floor` while keeping the vector on the
/// simplex. Entries at the floor stay there; the remaining mass is spread
/// proportionally over the others. A vector with non-positive sum becomes
/// uniform. Requires floor * size < 1.
void project_to_floored_simplex(std::span<double> values,
                                double floor = kSimplexFloor);

enum class DistributionRole { labeled, unlabeled };

/// K x K matrix whose row i is a class-conditional mean prediction.
class DistributionMatrix {
 public:
  DistributionMatrix() = default;
  /// Uniform rows.
  DistributionMatrix(std::size_t classes, DistributionRole role);

  /// Stores `values` (K*K, row-major) verbatim after checking every row is on
  /// the floored simplex. Throws DimensionError otherwise.
  static DistributionMatrix from_rows(std::size_t classes,
                                      DistributionRole role,
                                      std::vector<double> values);

  std::size_t classes() const { return classes_; }
  DistributionRole role() const { return role_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * classes_, classes_};
  }
  double at(std::size_t i, std::size_t j) const {
    return values_[i * classes_ + j];
  }
  std::vector<double> diagonal() const;

  /// Stores the row after projecting it onto the floored simplex.
  void store_row(std::size_t i, std::span<const double> row);

  friend bool operator==(const DistributionMatrix&,
                         const DistributionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  DistributionRole role_ = DistributionRole::labeled;
  std::vector<double> values_;
};

// Column layout of the handcrafted per-pixel features.
inline constexpr std::size_t kFeatureIntensity = 0;
inline constexpr std::size_t kFeatureRow = 1;
inline constexpr std::size_t kFeatureCol = 2;
inline constexpr std::size_t kFeatureLocalMean = 3;
inline constexpr std::size_t kFeatureLocalVariance = 4;
inline constexpr std::size_t kDefaultFeatureDim = 5;

/// Per-pixel feature vectors for one image.
struct FeatureImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t pixels() const { return height * width; }
  std::span<const double> pixel(std::size_t p) const {
    return {values.data() + p * dim, dim};
  }

  friend bool operator==(const FeatureImage&, const FeatureImage&) = default;
};

struct LabeledImage {
  FeatureImage features;
  LabelMap labels;
};

/// Labeled images, unlabeled images and the ground truth of the unlabeled
/// images. The ground truth is for evaluation only; training code receives a
/// TrainingData view that cannot reach it.
struct DatasetSplit {
  std::size_t classes = 0;
  std::size_t feature_dim = 0;
  std::vector<LabeledImage> labeled;
  std::vector<FeatureImage> unlabeled;
  std::vector<LabelMap> hidden_truth;
  // Generation-order indices, used to check that the two sets are disjoint.
  std::vector<std::size_t> labeled_ids;
  std::vector<std::size_t> unlabeled_ids;
};

struct TrainingData {
  std::size_t classes = 0;
  std::size_t feature_dim = 0;
  std::span<const LabeledImage> labeled;
  std::span<const FeatureImage> unlabeled;
};

struct EvalSet {
  std::span<const FeatureImage> images;
  std::span<const LabelMap> truth;
};

TrainingData training_data(const DatasetSplit& split);
EvalSet evaluation_set(const DatasetSplit& split);

/// Throws DimensionError on inconsistent shapes, overlapping id sets or
/// non-finite features.
void validate_split(const DatasetSplit& split);

}  // namespace coda
