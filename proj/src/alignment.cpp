#include "coda/alignment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "coda/error.hpp"

namespace coda {

AlignmentState AlignmentState::uniform(std::size_t classes, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("EMA momentum must lie in (0, 1)");
  }
  return AlignmentState{
      DistributionMatrix(classes, DistributionRole::labeled),
      DistributionMatrix(classes, DistributionRole::unlabeled), alpha, 0};
}

ClassConditionalMeans class_conditional_means(const ProbabilityMap& probs,
                                              const LabelMap& labels) {
  if (probs.pixels() != labels.pixels()) {
    throw DimensionError("prediction and label pixel counts differ");
  }
  const std::size_t k = probs.classes();
  ClassConditionalMeans stats{k, std::vector<double>(k * k, 0.0),
                              std::vector<std::size_t>(k, 0)};
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    const auto cls = static_cast<std::size_t>(labels.at(p));
    if (cls >= k) throw InvalidLabelError("label outside prediction classes");
    ++stats.counts[cls];
    const auto pixel = probs.pixel(p);
    double* row = stats.means.data() + cls * k;
    for (std::size_t j = 0; j < k; ++j) row[j] += pixel[j];
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (stats.counts[i] == 0) continue;
    const double inv = 1.0 / static_cast<double>(stats.counts[i]);
    for (std::size_t j = 0; j < k; ++j) stats.means[i * k + j] *= inv;
  }
  return stats;
}

namespace {

void ema_row(DistributionMatrix& matrix, double alpha,
             std::span<const double> batch_mean, std::size_t cls) {
  const auto previous = matrix.row(cls);
  std::vector<double> blended(previous.size());
  for (std::size_t j = 0; j < blended.size(); ++j) {
    blended[j] = alpha * previous[j] + (1.0 - alpha) * batch_mean[j];
  }
  matrix.store_row(cls, blended);
}

}  // namespace

void update_labeled_row(AlignmentState& state,
                        const ClassConditionalMeans& stats, std::size_t cls) {
  if (stats.counts.at(cls) == 0) return;
  ema_row(state.labeled, state.alpha, stats.row(cls), cls);
}

void update_labeled_row(AlignmentState& state, const ProbabilityMap& probs,
                        const LabelMap& labels, std::size_t cls) {
  update_labeled_row(state, class_conditional_means(probs, labels), cls);
}

bool update_unlabeled_row(AlignmentState& state,
                          const ClassConditionalMeans& stats, std::size_t cls) {
  if (stats.counts.at(cls) > 0) {
    ema_row(state.unlabeled, state.alpha, stats.row(cls), cls);
    return false;
  }
  const auto labeled_row = state.labeled.row(cls);
  const auto unlabeled_row = state.unlabeled.row(cls);
  // Components pinned at the floor would dominate the ratio mean.
  double ratio_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < labeled_row.size(); ++j) {
    if (labeled_row[j] <= kSimplexFloor) continue;
    ratio_sum += unlabeled_row[j] / labeled_row[j];
    ++used;
  }
  const double scale = used ? ratio_sum / static_cast<double>(used) : 1.0;
  std::vector<double> rebuilt(labeled_row.size());
  for (std::size_t j = 0; j < rebuilt.size(); ++j) {
    rebuilt[j] = labeled_row[j] * scale;
  }
  state.unlabeled.store_row(cls, rebuilt);
  ++state.fallback_count;
  return true;
}

bool update_unlabeled_row(AlignmentState& state, const ProbabilityMap& probs,
                          const LabelMap& pseudo_labels, std::size_t cls) {
  return update_unlabeled_row(state,
                              class_conditional_means(probs, pseudo_labels),
                              cls);
}

void update_labeled(AlignmentState& state, const ProbabilityMap& probs,
                    const LabelMap& labels) {
  const auto stats = class_conditional_means(probs, labels);
  for (std::size_t i = 0; i < state.classes(); ++i) {
    update_labeled_row(state, stats, i);
  }
}

void update_unlabeled(AlignmentState& state, const ProbabilityMap& probs,
                      const LabelMap& pseudo_labels) {
  const auto stats = class_conditional_means(probs, pseudo_labels);
  for (std::size_t i = 0; i < state.classes(); ++i) {
    update_unlabeled_row(state, stats, i);
  }
}

double temperature(const AlignmentState& state, std::size_t cls) {
  return 1.0 - state.labeled.at(cls, cls);
}

double dynamic_threshold(const AlignmentState& state, std::size_t cls) {
  return state.unlabeled.at(cls, cls);
}

void align_prediction(std::span<const double> pixel,
                      std::span<const double> labeled_row,
                      std::span<const double> unlabeled_row, double tau,
                      std::span<double> out) {
  double sum = 0.0;
  for (std::size_t k = 0; k < pixel.size(); ++k) {
    out[k] = pixel[k] * std::pow(labeled_row[k], tau) / unlabeled_row[k];
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
}

std::vector<double> align_prediction(const AlignmentState& state,
                                     std::span<const double> pixel,
                                     std::size_t cls) {
  if (pixel.size() != state.classes()) {
    throw DimensionError("pixel vector length differs from K");
  }
  std::vector<double> out(pixel.size());
  align_prediction(pixel, state.labeled.row(cls), state.unlabeled.row(cls),
                   temperature(state, cls), out);
  return out;
}

namespace {

double threshold_for(const AlignmentState& state, ThresholdRule rule,
                     std::size_t cls) {
  return rule.is_dynamic() ? dynamic_threshold(state, cls) : *rule.static_value;
}

}  // namespace

AlignedMap align_map(const AlignmentState& state, const ProbabilityMap& map,
                     ThresholdRule rule, ConfidenceSource source) {
  const std::size_t k = map.classes();
  if (k != state.classes()) {
    throw DimensionError("map classes differ from alignment state");
  }
  // The factor vector only depends on the row, so it is computed once per class.
  std::vector<double> factors(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double tau = temperature(state, i);
    for (std::size_t j = 0; j < k; ++j) {
      factors[i * k + j] =
          std::pow(state.labeled.at(i, j), tau) / state.unlabeled.at(i, j);
    }
  }
  const std::size_t n = map.pixels();
  std::vector<double> aligned(n * k);
  std::vector<std::int32_t> labels(n);
  std::vector<double> confidence(n);
  std::vector<std::uint8_t> mask(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto pixel = map.pixel(p);
    const std::size_t row = argmax(pixel);
    double* out = aligned.data() + p * k;
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = pixel[j] * factors[row * k + j];
      sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    const std::size_t label = argmax(std::span<const double>(out, k));
    labels[p] = static_cast<std::int32_t>(label);
    confidence[p] =
        source == ConfidenceSource::raw ? pixel[row] : out[label];
    mask[p] = confidence[p] > threshold_for(state, rule, label) ? 1 : 0;
  }
  return AlignedMap{ProbabilityMap(map.height(), map.width(), k,
                                   std::move(aligned)),
                    LabelMap(map.height(), map.width(), k, std::move(labels)),
                    std::move(confidence), std::move(mask)};
}

AlignedMap threshold_map(const AlignmentState& state,
                         const ProbabilityMap& map, ThresholdRule rule) {
  const std::size_t n = map.pixels();
  auto labels = argmax_labels(map);
  std::vector<double> confidence(n);
  std::vector<std::uint8_t> mask(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto label = static_cast<std::size_t>(labels.at(p));
    confidence[p] = map.pixel(p)[label];
    mask[p] = confidence[p] > threshold_for(state, rule, label) ? 1 : 0;
  }
  return AlignedMap{map, std::move(labels), std::move(confidence),
                    std::move(mask)};
}

NaiveDAState NaiveDAState::uniform(std::size_t classes, double alpha) {
  const double u = 1.0 / static_cast<double>(classes);
  return NaiveDAState{std::vector<double>(classes, u),
                      std::vector<double>(classes, u), alpha};
}

void update_naive_unlabeled(NaiveDAState& state, const ProbabilityMap& probs) {
  const std::size_t k = probs.classes();
  if (k != state.unlabeled_dist.size()) {
    throw DimensionError("naive DA state has wrong class count");
  }
  if (probs.pixels() == 0) return;
  std::vector<double> mean(k, 0.0);
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    const auto pixel = probs.pixel(p);
    for (std::size_t j = 0; j < k; ++j) mean[j] += pixel[j];
  }
  for (std::size_t j = 0; j < k; ++j) {
    mean[j] /= static_cast<double>(probs.pixels());
    state.unlabeled_dist[j] =
        state.alpha * state.unlabeled_dist[j] + (1.0 - state.alpha) * mean[j];
  }
  project_to_floored_simplex(state.unlabeled_dist);
}

ProbabilityMap naive_da_align(const NaiveDAState& state,
                              const ProbabilityMap& map) {
  const std::size_t k = map.classes();
  if (k != state.labeled_dist.size() || k != state.unlabeled_dist.size()) {
    throw DimensionError("naive DA state has wrong class count");
  }
  std::vector<double> factor(k);
  for (std::size_t j = 0; j < k; ++j) {
    factor[j] = state.labeled_dist[j] / state.unlabeled_dist[j];
  }
  std::vector<double> out(map.values().begin(), map.values().end());
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    double* v = out.data() + p * k;
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      v[j] *= factor[j];
      sum += v[j];
    }
    for (std::size_t j = 0; j < k; ++j) v[j] /= sum;
  }
  return ProbabilityMap(map.height(), map.width(), k, std::move(out));
}

namespace {

void write_matrix(std::ostringstream& out, const DistributionMatrix& m) {
  char buf[40];
  for (std::size_t i = 0; i < m.classes(); ++i) {
    for (std::size_t j = 0; j < m.classes(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace

std::string serialize_alignment(const AlignmentState& state) {
  std::ostringstream out;
  char alpha[40];
  std::snprintf(alpha, sizeof alpha, "%.17g", state.alpha);
  out << "# coda-alignment K=" << state.classes() << " alpha=" << alpha
      << " fallback=" << state.fallback_count << '\n';
  out << "# labeled\n";
  write_matrix(out, state.labeled);
  out << "# unlabeled\n";
  write_matrix(out, state.unlabeled);
  return out.str();
}

AlignmentState parse_alignment(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t classes = 0;
  double alpha = kDefaultEmaMomentum;
  std::uint64_t fallback = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        if (token.rfind("K=", 0) == 0) classes = std::stoul(token.substr(2));
        if (token.rfind("alpha=", 0) == 0) alpha = std::stod(token.substr(6));
        if (token.rfind("fallback=", 0) == 0) {
          fallback = std::stoull(token.substr(9));
        }
      }
      continue;
    }
    std::istringstream values(line);
    std::vector<double> row;
    for (double v; values >> v;) row.push_back(v);
    rows.push_back(std::move(row));
  }
  if (classes == 0) classes = rows.size() / 2;
  if (classes < 2 || rows.size() != 2 * classes) {
    throw IoError("alignment dump must hold two K x K matrices");
  }
  std::vector<double> labeled, unlabeled;
  for (std::size_t i = 0; i < classes; ++i) {
    if (rows[i].size() != classes || rows[classes + i].size() != classes) {
      throw IoError("alignment dump row has wrong length");
    }
    labeled.insert(labeled.end(), rows[i].begin(), rows[i].end());
    unlabeled.insert(unlabeled.end(), rows[classes + i].begin(),
                     rows[classes + i].end());
  }
  auto state = AlignmentState::uniform(classes, alpha);
  state.fallback_count = fallback;
  try {
    state.labeled = DistributionMatrix::from_rows(
        classes, DistributionRole::labeled, std::move(labeled));
    state.unlabeled = DistributionMatrix::from_rows(
        classes, DistributionRole::unlabeled, std::move(unlabeled));
  } catch (const DimensionError& e) {
    throw IoError(std::string("alignment dump: ") + e.what());
  }
  return state;
}

}  // namespace coda
