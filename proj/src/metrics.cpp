#include "coda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "coda/error.hpp"

namespace coda::metrics {

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth) {
  ConfusionCounts counts(truth.classes());
  accumulate(counts, pred, truth);
  return counts;
}

void accumulate(ConfusionCounts& counts, const LabelMap& pred,
                const LabelMap& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw DimensionError("prediction and truth shapes differ");
  }
  if (pred.classes() != counts.classes || truth.classes() != counts.classes) {
    throw DimensionError("class count mismatch in confusion counts");
  }
  const std::uint64_t n = truth.pixels();
  std::vector<std::uint64_t> hits(counts.classes, 0), predicted(counts.classes, 0),
      actual(counts.classes, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto t = static_cast<std::size_t>(truth.at(p));
    const auto q = static_cast<std::size_t>(pred.at(p));
    ++actual[t];
    ++predicted[q];
    if (t == q) ++hits[t];
  }
  for (std::size_t k = 0; k < counts.classes; ++k) {
    counts.tp[k] += hits[k];
    counts.fp[k] += predicted[k] - hits[k];
    counts.fn[k] += actual[k] - hits[k];
    counts.tn[k] += n - predicted[k] - actual[k] + hits[k];
  }
}

namespace {

bool absent(const ConfusionCounts& c, std::size_t k) {
  return c.tp[k] + c.fp[k] + c.fn[k] == 0;
}

}  // namespace

double iou(const ConfusionCounts& c, std::size_t k) {
  if (absent(c, k)) return 1.0;
  return static_cast<double>(c.tp[k]) /
         static_cast<double>(c.tp[k] + c.fp[k] + c.fn[k]);
}

double jaccard(const ConfusionCounts& c, std::size_t k) { return iou(c, k); }

double dice(const ConfusionCounts& c, std::size_t k) {
  if (absent(c, k)) return 1.0;
  return 2.0 * static_cast<double>(c.tp[k]) /
         static_cast<double>(2 * c.tp[k] + c.fp[k] + c.fn[k]);
}

double miou(const ConfusionCounts& c, AbsentClass policy) {
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < c.classes; ++k) {
    if (policy == AbsentClass::skip && absent(c, k)) continue;
    sum += iou(c, k);
    ++used;
  }
  return used ? sum / static_cast<double>(used) : 1.0;
}

BinaryVolume class_mask(const LabelMap& labels, std::size_t cls) {
  BinaryVolume mask{1, labels.height(), labels.width(),
                    std::vector<std::uint8_t>(labels.pixels(), 0)};
  for (std::size_t p = 0; p < labels.pixels(); ++p) {
    mask.values[p] = static_cast<std::size_t>(labels.at(p)) == cls ? 1 : 0;
  }
  return mask;
}

VoxelSet extract_surface(const BinaryVolume& mask) {
  if (mask.values.size() != mask.depth * mask.height * mask.width) {
    throw DimensionError("binary volume size mismatch");
  }
  const bool volumetric = mask.depth > 1;
  auto background = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= static_cast<long>(mask.depth) ||
        y >= static_cast<long>(mask.height) ||
        x >= static_cast<long>(mask.width)) {
      return true;
    }
    return !mask.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y),
                    static_cast<std::size_t>(x));
  };
  VoxelSet surface;
  for (long z = 0; z < static_cast<long>(mask.depth); ++z) {
    for (long y = 0; y < static_cast<long>(mask.height); ++y) {
      for (long x = 0; x < static_cast<long>(mask.width); ++x) {
        if (background(z, y, x)) continue;
        bool edge = background(z, y - 1, x) || background(z, y + 1, x) ||
                    background(z, y, x - 1) || background(z, y, x + 1);
        if (volumetric) edge = edge || background(z - 1, y, x) || background(z + 1, y, x);
        if (edge) {
          surface.points.push_back({static_cast<int>(x), static_cast<int>(y),
                                    static_cast<int>(z)});
        }
      }
    }
  }
  return surface;
}

namespace {

double squared_distance(const Voxel& a, const Voxel& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    s += diff * diff;
  }
  return s;
}

std::vector<double> brute_force(const VoxelSet& from, const VoxelSet& to) {
  std::vector<double> out;
  out.reserve(from.points.size());
  for (const auto& a : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to.points) best = std::min(best, squared_distance(a, b));
    out.push_back(std::sqrt(best) * from.spacing);
  }
  return out;
}

// Uniform grid of cubic cells; rings of cells are searched outward until the
// nearest candidate found is provably closer than anything in the next ring.
class SpatialHash {
 public:
  SpatialHash(const VoxelSet& points, int cell) : cell_(cell) {
    lo_ = hi_ = points.points.front();
    for (const auto& p : points.points) {
      for (int d = 0; d < 3; ++d) {
        lo_[d] = std::min(lo_[d], p[d]);
        hi_[d] = std::max(hi_[d], p[d]);
      }
      cells_[key(cell_of(p))].push_back(p);
    }
  }

  double nearest_squared(const Voxel& q) const {
    const auto c = cell_of(q);
    std::array<int, 3> lo_cell = cell_of(lo_), hi_cell = cell_of(hi_);
    int max_ring = 0;
    for (int d = 0; d < 3; ++d) {
      max_ring = std::max({max_ring, std::abs(c[d] - lo_cell[d]),
                           std::abs(c[d] - hi_cell[d])});
    }
    double best = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int dz = -ring; dz <= ring; ++dz) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == cells_.end()) continue;
            for (const auto& p : it->second) best = std::min(best, squared_distance(q, p));
          }
        }
      }
      const double reach = static_cast<double>(ring) * cell_;
      if (best <= reach * reach) break;
    }
    return best;
  }

 private:
  std::array<int, 3> cell_of(const Voxel& p) const {
    auto div = [&](int v) { return v >= 0 ? v / cell_ : -((-v + cell_ - 1) / cell_); };
    return {div(p[0]), div(p[1]), div(p[2])};
  }
  static std::int64_t key(const std::array<int, 3>& c) {
    return (static_cast<std::int64_t>(c[0]) * 73856093) ^
           (static_cast<std::int64_t>(c[1]) * 19349663) ^
           (static_cast<std::int64_t>(c[2]) * 83492791);
  }

  int cell_;
  Voxel lo_{}, hi_{};
  std::unordered_map<std::int64_t, std::vector<Voxel>> cells_;
};

std::vector<double> hashed(const VoxelSet& from, const VoxelSet& to) {
  // Cell edge grows with the bounding box so each cell holds a handful of points.
  Voxel lo = to.points.front(), hi = to.points.front();
  for (const auto& p : to.points) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  double extent = 1.0;
  for (int d = 0; d < 3; ++d) extent = std::max(extent, static_cast<double>(hi[d] - lo[d] + 1));
  const int cell = std::max(
      1, static_cast<int>(extent / std::sqrt(static_cast<double>(to.points.size()))));
  SpatialHash grid(to, cell);
  std::vector<double> out;
  out.reserve(from.points.size());
  for (const auto& a : from.points) {
    out.push_back(std::sqrt(grid.nearest_squared(a)) * from.spacing);
  }
  return out;
}

void require_nonempty(const VoxelSet& a, const VoxelSet& b) {
  if (a.points.empty() || b.points.empty()) {
    throw UndefinedMetricError("surface distance of an empty voxel set");
  }
}

}  // namespace

std::vector<double> directed_distances(const VoxelSet& from,
                                       const VoxelSet& to,
                                       NeighborSearch search) {
  require_nonempty(from, to);
  if (search == NeighborSearch::automatic) {
    search = to.points.size() < kBruteForceLimit ? NeighborSearch::brute_force
                                                 : NeighborSearch::spatial_hash;
  }
  return search == NeighborSearch::brute_force ? brute_force(from, to)
                                               : hashed(from, to);
}

double asd(const VoxelSet& a, const VoxelSet& b, NeighborSearch search) {
  const auto ab = directed_distances(a, b, search);
  const auto ba = directed_distances(b, a, search);
  double sum = 0.0;
  for (double d : ab) sum += d;
  for (double d : ba) sum += d;
  return sum / static_cast<double>(ab.size() + ba.size());
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UndefinedMetricError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

HausdorffResult hausdorff(const VoxelSet& a, const VoxelSet& b,
                          NeighborSearch search) {
  auto pooled = directed_distances(a, b, search);
  const auto ba = directed_distances(b, a, search);
  pooled.insert(pooled.end(), ba.begin(), ba.end());
  HausdorffResult r;
  r.hd = *std::max_element(pooled.begin(), pooled.end());
  r.hd95 = nearest_rank_percentile(std::move(pooled), 95.0);
  return r;
}

MetricReport evaluate_segmentation(std::span<const LabelMap> predictions,
                                   std::span<const LabelMap> truths,
                                   AbsentClass absent_policy) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw DimensionError("evaluation needs matching, non-empty map lists");
  }
  const std::size_t k = truths.front().classes();
  ConfusionCounts counts(k);
  double asd_sum = 0.0, hd_sum = 0.0, hd95_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    accumulate(counts, predictions[i], truths[i]);
    for (std::size_t cls = 1; cls < k; ++cls) {
      const auto a = extract_surface(class_mask(truths[i], cls));
      const auto b = extract_surface(class_mask(predictions[i], cls));
      if (a.points.empty() || b.points.empty()) continue;
      asd_sum += asd(a, b);
      const auto h = hausdorff(a, b);
      hd_sum += h.hd;
      hd95_sum += h.hd95;
      ++pairs;
    }
  }
  MetricReport report;
  for (std::size_t cls = 0; cls < k; ++cls) {
    report.per_class.push_back({iou(counts, cls), dice(counts, cls),
                                jaccard(counts, cls)});
  }
  report.miou = miou(counts, absent_policy);
  if (pairs) {
    const auto n = static_cast<double>(pairs);
    report.asd = asd_sum / n;
    report.hd = hd_sum / n;
    report.hd95 = hd95_sum / n;
  }
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& s = report.per_class[k];
    per_class[std::to_string(k)] = {
        {"dice", s.dice}, {"jaccard", s.jaccard}, {"iou", s.iou}};
  }
  auto optional = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"per_class", per_class},
          {"miou", report.miou},
          {"asd", optional(report.asd)},
          {"hd", optional(report.hd)},
          {"hd95", optional(report.hd95)}};
}

}  // namespace coda::metrics
