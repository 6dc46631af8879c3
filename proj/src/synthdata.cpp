#include "coda/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "coda/error.hpp"

namespace coda::synth {

std::vector<double> long_tail_frequencies(std::size_t classes, double rho) {
  if (classes < 2 || rho < 1.0) {
    throw ConfigError("long-tail frequencies need K >= 2 and rho >= 1");
  }
  std::vector<double> f(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    f[k] = std::pow(rho, -static_cast<double>(k) /
                             static_cast<double>(classes - 1));
  }
  const double sum = std::accumulate(f.begin(), f.end(), 0.0);
  for (auto& v : f) v /= sum;
  return f;
}

std::vector<double> spaced_means(std::size_t classes) {
  std::vector<double> m(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    m[k] = classes == 1 ? 0.5
                        : 0.1 + 0.8 * static_cast<double>(k) /
                                    static_cast<double>(classes - 1);
  }
  return m;
}

SceneSpec tail5() {
  SceneSpec spec;
  spec.classes = 5;
  std::vector<double> f{1.0, 1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0, 1.0 / 54.0};
  const double sum = std::accumulate(f.begin(), f.end(), 0.0);
  for (auto& v : f) v /= sum;
  spec.frequencies = f;
  spec.class_means = {0.1, 0.3, 0.5, 0.7, 0.9};
  return spec;
}

void validate_spec(const SceneSpec& spec) {
  std::ostringstream problems;
  if (spec.classes < 2 || spec.classes > 256) problems << " classes must be in [2, 256];";
  if (spec.height < 3 || spec.width < 3) problems << " image must be at least 3x3;";
  if (spec.frequencies.size() != spec.classes) {
    problems << " frequencies need one entry per class;";
  } else {
    double sum = 0.0;
    for (double f : spec.frequencies) {
      if (!(f >= 0.0)) problems << " frequencies must be non-negative;";
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-6) problems << " frequencies must sum to 1;";
  }
  if (spec.class_means.size() != spec.classes) problems << " class_means need one entry per class;";
  if (spec.palette.empty()) problems << " palette is empty;";
  if (!(spec.noise_sigma >= 0.0)) problems << " noise sigma must be >= 0;";
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0)) {
    problems << " labeled fraction must be in (0, 1];";
  }
  if (spec.images == 0) problems << " need at least one image;";
  const auto text = problems.str();
  if (!text.empty()) throw ConfigError("invalid scene spec:" + text);
}

namespace {

struct Canvas {
  std::size_t height, width;
  std::vector<std::int32_t> labels;
  std::vector<std::size_t> counts;

  // Paints `cls` on every covered pixel; when `only_background` is set,
  // pixels of other foreground classes are left alone.
  template <typename Covers>
  void paint(std::int32_t cls, bool only_background, Covers&& covers) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        if (!covers(static_cast<double>(y), static_cast<double>(x))) continue;
        auto& cell = labels[y * width + x];
        if (cell == cls || (only_background && cell != 0)) continue;
        --counts[static_cast<std::size_t>(cell)];
        ++counts[static_cast<std::size_t>(cls)];
        cell = cls;
      }
    }
  }
};

void paint_shape(Canvas& canvas, std::int32_t cls, ShapeKind kind, double area,
                 bool only_background, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(canvas.height - 1));
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(canvas.width - 1));
  const double cy = uy(rng), cx = ux(rng);
  switch (kind) {
    case ShapeKind::disk: {
      const double r = std::max(1.5, std::sqrt(area / std::numbers::pi));
      canvas.paint(cls, only_background, [&](double y, double x) {
        return (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
      });
      break;
    }
    case ShapeKind::rectangle: {
      std::uniform_real_distribution<double> aspect(0.5, 2.0);
      const double w = std::max(2.0, std::sqrt(area * aspect(rng)));
      const double h = std::max(2.0, area / w);
      canvas.paint(cls, only_background, [&](double y, double x) {
        return std::abs(y - cy) <= h / 2.0 && std::abs(x - cx) <= w / 2.0;
      });
      break;
    }
    case ShapeKind::ring: {
      const double outer =
          std::max(2.5, std::sqrt(area / (0.75 * std::numbers::pi)));
      const double inner = 0.5 * outer;
      canvas.paint(cls, only_background, [&](double y, double x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        return d2 <= outer * outer && d2 >= inner * inner;
      });
      break;
    }
  }
}

constexpr int kMaxShapeAttempts = 400;

}  // namespace

Scene generate_scene(const SceneSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.height * spec.width;
  Canvas canvas{spec.height, spec.width, std::vector<std::int32_t>(n, 0),
                std::vector<std::size_t>(spec.classes, 0)};
  canvas.counts[0] = n;
  std::vector<std::size_t> targets(spec.classes, 0);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::uniform_int_distribution<std::size_t> pick_shape(0, spec.palette.size() - 1);
  std::uniform_int_distribution<int> shape_count(1, 3);

  auto fill_class = [&](std::size_t cls, bool only_background, double tolerance) {
    const auto target = targets[cls];
    const auto label = static_cast<std::int32_t>(cls);
    int remaining_shapes = shape_count(rng);
    int attempts = 0;
    while (static_cast<double>(canvas.counts[cls]) <
           static_cast<double>(target) * (1.0 - tolerance)) {
      if (++attempts > kMaxShapeAttempts) {
        throw GenerationError(
            "class " + std::to_string(cls) + " reached " +
            std::to_string(canvas.counts[cls]) + " of " +
            std::to_string(target) + " target pixels on a " +
            std::to_string(spec.height) + "x" + std::to_string(spec.width) +
            " image after " + std::to_string(kMaxShapeAttempts) +
            " shapes; frequencies are infeasible");
      }
      const double deficit = static_cast<double>(target - canvas.counts[cls]);
      const double area = deficit / std::max(1, remaining_shapes);
      remaining_shapes = std::max(1, remaining_shapes - 1);
      paint_shape(canvas, label, spec.palette[pick_shape(rng)], area,
                  only_background, rng);
    }
  };

  for (std::size_t cls = 1; cls < spec.classes; ++cls) {
    targets[cls] = static_cast<std::size_t>(
        std::llround(spec.frequencies[cls] * static_cast<double>(n) * jitter(rng)));
    if (targets[cls] >= n) {
      throw GenerationError("class " + std::to_string(cls) +
                            " target exceeds the image area");
    }
  }
  for (std::size_t cls = 1; cls < spec.classes; ++cls) {
    if (targets[cls] > 0) fill_class(cls, false, 0.0);
  }
  // Later classes may have covered earlier ones; top those up on background.
  for (std::size_t cls = 1; cls < spec.classes; ++cls) {
    if (targets[cls] > 0) fill_class(cls, true, 0.1);
  }

  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::vector<double> intensity(n);
  for (std::size_t p = 0; p < n; ++p) {
    intensity[p] = spec.class_means[static_cast<std::size_t>(canvas.labels[p])];
    if (spec.noise_sigma > 0.0) intensity[p] += noise(rng);
  }
  return Scene{std::move(intensity),
               LabelMap(spec.height, spec.width, spec.classes,
                        std::move(canvas.labels))};
}

FeatureImage compute_features(std::span<const double> intensity,
                              std::size_t height, std::size_t width) {
  FeatureImage image{height, width, kDefaultFeatureDim,
                     std::vector<double>(height * width * kDefaultFeatureDim)};
  auto as_float = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double sum = 0.0, sq = 0.0;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const long yy = static_cast<long>(y) + dy;
          const long xx = static_cast<long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(height) ||
              xx >= static_cast<long>(width)) {
            continue;
          }
          const double v = intensity[static_cast<std::size_t>(yy) * width +
                                     static_cast<std::size_t>(xx)];
          sum += v;
          sq += v * v;
          ++count;
        }
      }
      const double mean = sum / count;
      const double variance = std::max(0.0, sq / count - mean * mean);
      double* f = image.values.data() + (y * width + x) * kDefaultFeatureDim;
      f[kFeatureIntensity] = as_float(intensity[y * width + x]);
      f[kFeatureRow] = as_float(static_cast<double>(y) / static_cast<double>(height - 1));
      f[kFeatureCol] = as_float(static_cast<double>(x) / static_cast<double>(width - 1));
      f[kFeatureLocalMean] = as_float(mean);
      f[kFeatureLocalVariance] = as_float(variance);
    }
  }
  return image;
}

DatasetSplit generate(const SceneSpec& spec) {
  validate_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<Scene> scenes;
  scenes.reserve(spec.images);
  for (std::size_t i = 0; i < spec.images; ++i) {
    scenes.push_back(generate_scene(spec, rng));
  }

  std::vector<std::size_t> order(spec.images);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(spec.seed ^ 0x5eed5eed5eedULL);
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto labeled_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.labeled_fraction *
                                            static_cast<double>(spec.images))),
      1, spec.images);

  DatasetSplit split;
  split.classes = spec.classes;
  split.feature_dim = kDefaultFeatureDim;
  split.labeled_ids.assign(order.begin(), order.begin() + static_cast<long>(labeled_count));
  split.unlabeled_ids.assign(order.begin() + static_cast<long>(labeled_count), order.end());
  std::sort(split.labeled_ids.begin(), split.labeled_ids.end());
  std::sort(split.unlabeled_ids.begin(), split.unlabeled_ids.end());
  for (auto id : split.labeled_ids) {
    auto& scene = scenes[id];
    split.labeled.push_back(
        {compute_features(scene.intensity, spec.height, spec.width),
         scene.labels});
  }
  for (auto id : split.unlabeled_ids) {
    auto& scene = scenes[id];
    split.unlabeled.push_back(
        compute_features(scene.intensity, spec.height, spec.width));
    split.hidden_truth.push_back(scene.labels);
  }
  return split;
}

void flip_pixel_features(std::span<double> pixel) {
  if (pixel.size() > kFeatureCol) pixel[kFeatureCol] = 1.0 - pixel[kFeatureCol];
}

LabeledImage augment(const LabeledImage& sample, const AugmentOptions& options,
                     std::mt19937_64& rng) {
  const auto& in = sample.features;
  LabeledImage out = sample;
  std::bernoulli_distribution flip(options.flip_probability);
  if (flip(rng)) {
    std::vector<std::int32_t> labels(sample.labels.pixels());
    for (std::size_t y = 0; y < in.height; ++y) {
      for (std::size_t x = 0; x < in.width; ++x) {
        const std::size_t src = y * in.width + x;
        const std::size_t dst = y * in.width + (in.width - 1 - x);
        labels[dst] = sample.labels.at(src);
        std::copy_n(in.values.begin() + static_cast<long>(src * in.dim), in.dim,
                    out.features.values.begin() + static_cast<long>(dst * in.dim));
        flip_pixel_features(std::span<double>(
            out.features.values.data() + dst * in.dim, in.dim));
      }
    }
    out.labels = LabelMap(sample.labels.height(), sample.labels.width(),
                          sample.labels.classes(), std::move(labels));
  }
  if (options.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, options.noise_sigma);
    for (std::size_t p = 0; p < in.pixels(); ++p) {
      double* f = out.features.values.data() + p * in.dim;
      f[kFeatureIntensity] += noise(rng);
      if (in.dim > kFeatureLocalMean) f[kFeatureLocalMean] += noise(rng);
    }
  }
  return out;
}

std::vector<double> empirical_distribution(std::span<const LabelMap> maps) {
  if (maps.empty()) throw DimensionError("empirical distribution of no maps");
  const std::size_t k = maps.front().classes();
  std::vector<double> counts(k, 0.0);
  double total = 0.0;
  for (const auto& map : maps) {
    if (map.classes() != k) throw DimensionError("maps disagree on K");
    for (auto label : map.labels()) counts[static_cast<std::size_t>(label)] += 1.0;
    total += static_cast<double>(map.pixels());
  }
  if (total == 0.0) throw DimensionError("empirical distribution of empty maps");
  for (auto& c : counts) c /= total;
  return counts;
}

}  // namespace coda::synth
