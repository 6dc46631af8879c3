#pragma once

// Segmentation metrics: confusion counts, IoU/Dice/Jaccard, and surface
// distances (ASD, HD, 95HD) between voxel sets in grid units.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "coda/types.hpp"

namespace coda::metrics {

struct ConfusionCounts {
  std::size_t classes = 0;
  std::vector<std::uint64_t> tp, fp, fn, tn;

  explicit ConfusionCounts(std::size_t k = 0)
      : classes(k), tp(k, 0), fp(k, 0), fn(k, 0), tn(k, 0) {}

  std::uint64_t total() const {
    return classes ? tp[0] + fp[0] + fn[0] + tn[0] : 0;
  }
  friend bool operator==(const ConfusionCounts&,
                         const ConfusionCounts&) = default;
};

/// One-vs-rest counts. Throws DimensionError on shape mismatch.
ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth);
void accumulate(ConfusionCounts& counts, const LabelMap& pred,
                const LabelMap& truth);

/// How a class absent from both prediction and truth enters the mean.
enum class AbsentClass { score_one, skip };

double iou(const ConfusionCounts& counts, std::size_t cls);
double dice(const ConfusionCounts& counts, std::size_t cls);
double jaccard(const ConfusionCounts& counts, std::size_t cls);
double miou(const ConfusionCounts& counts,
            AbsentClass absent = AbsentClass::score_one);

using Voxel = std::array<int, 3>;

struct VoxelSet {
  std::vector<Voxel> points;
  double spacing = 1.0;
};

/// Binary mask on a depth x height x width grid; depth 1 means 2D.
struct BinaryVolume {
  std::size_t depth = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  bool at(std::size_t z, std::size_t y, std::size_t x) const {
    return values[(z * height + y) * width + x] != 0;
  }
};

BinaryVolume class_mask(const LabelMap& labels, std::size_t cls);

/// Foreground cells with a background or out-of-bounds face neighbor
/// (4-connectivity in 2D, 6-connectivity in 3D).
VoxelSet extract_surface(const BinaryVolume& mask);

enum class NeighborSearch { automatic, brute_force, spatial_hash };

/// Below this many target points the automatic search is brute force.
inline constexpr std::size_t kBruteForceLimit = 500;

/// For every point of `from`, the distance to its nearest point of `to`.
std::vector<double> directed_distances(
    const VoxelSet& from, const VoxelSet& to,
    NeighborSearch search = NeighborSearch::automatic);

/// Throws UndefinedMetricError when either set is empty.
double asd(const VoxelSet& a, const VoxelSet& b,
           NeighborSearch search = NeighborSearch::automatic);

struct HausdorffResult {
  double hd = 0.0;
  double hd95 = 0.0;
};

/// HD is the larger directed maximum; 95HD is the nearest-rank 95th
/// percentile of the pooled directed distances.
HausdorffResult hausdorff(const VoxelSet& a, const VoxelSet& b,
                          NeighborSearch search = NeighborSearch::automatic);

/// Nearest-rank percentile (q in (0, 100]) of an unsorted sample.
double nearest_rank_percentile(std::vector<double> values, double q);

struct ClassScores {
  double iou = 0.0;
  double dice = 0.0;
  double jaccard = 0.0;
};

struct MetricReport {
  std::vector<ClassScores> per_class;
  double miou = 0.0;
  // Means over (image, foreground class) pairs present in both maps; empty
  // when no such pair exists.
  std::optional<double> asd;
  std::optional<double> hd;
  std::optional<double> hd95;
};

MetricReport evaluate_segmentation(std::span<const LabelMap> predictions,
                                   std::span<const LabelMap> truths,
                                   AbsentClass absent = AbsentClass::score_one);

/// {per_class: {"<k>": {dice, jaccard, iou}}, miou, asd, hd, hd95}
nlohmann::json to_json(const MetricReport& report);

}  // namespace coda::metrics
