#include "coda/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "coda/error.hpp"
#include "coda/image_io.hpp"

namespace coda {

namespace {

const std::map<TrainMode, std::string>& mode_names() {
  static const std::map<TrainMode, std::string> names{
      {TrainMode::supervised_only, "supervised_only"},
      {TrainMode::cotrain, "cotrain"},
      {TrainMode::cotrain_da, "cotrain_da"},
      {TrainMode::cotrain_oe, "cotrain_oe"},
      {TrainMode::cotrain_coda, "cotrain_coda"},
      {TrainMode::coda_oe, "coda_oe"},
  };
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument(text);
  return v;
}

std::uint64_t parse_uint(const std::string& text) {
  if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
  std::size_t used = 0;
  const auto v = std::stoull(text, &used);
  if (used != text.size()) throw std::invalid_argument(text);
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument(text);
}

}  // namespace

std::string to_string(TrainMode mode) { return mode_names().at(mode); }

TrainMode parse_mode(const std::string& text) {
  for (const auto& [mode, name] : mode_names()) {
    if (name == text) return mode;
  }
  throw ConfigError("unknown mode '" + text + "'");
}

bool uses_unlabeled(TrainMode mode) { return mode != TrainMode::supervised_only; }

bool uses_classwise_alignment(TrainMode mode) {
  return mode == TrainMode::cotrain_coda || mode == TrainMode::coda_oe;
}

bool uses_mask(TrainMode mode) {
  return mode == TrainMode::cotrain_oe || mode == TrainMode::coda_oe;
}

std::string to_string(const ThresholdRule& rule) {
  return rule.is_dynamic() ? "dynamic" : format_double(*rule.static_value);
}

ThresholdRule parse_threshold(const std::string& text) {
  if (text == "dynamic") return ThresholdRule::dynamic();
  double v = 0.0;
  try {
    v = parse_double(text);
  } catch (const std::exception&) {
    throw ConfigError("threshold must be 'dynamic' or a number, got '" + text + "'");
  }
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("static threshold must lie in [0, 1]");
  return ThresholdRule::fixed(v);
}

void apply_run_seed(TrainConfig& config, std::uint64_t seed) {
  config.seed_model_1 = 1000 * seed + 1;
  config.seed_model_2 = 1000 * seed + 2;
  config.seed_sampling = 1000 * seed + 3;
}

void validate(const TrainConfig& c) {
  std::vector<std::string> bad;
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) bad.push_back("alpha");
  if (!(c.lr > 0.0)) bad.push_back("lr");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) bad.push_back("momentum");
  if (!(c.lr_power >= 0.0)) bad.push_back("lr_power");
  if (c.batch_labeled == 0) bad.push_back("batch_labeled");
  if (c.batch_unlabeled == 0) bad.push_back("batch_unlabeled");
  if (c.max_iterations == 0) bad.push_back("max_iterations");
  if (c.hidden == 0) bad.push_back("hidden");
  if (!c.threshold.is_dynamic() &&
      !(*c.threshold.static_value >= 0.0 && *c.threshold.static_value <= 1.0)) {
    bad.push_back("threshold");
  }
  if (!(c.lambda_u >= 0.0)) bad.push_back("lambda_u");
  if (!(c.flip_probability >= 0.0 && c.flip_probability <= 1.0)) {
    bad.push_back("flip_probability");
  }
  if (!(c.augment_sigma >= 0.0)) bad.push_back("augment_sigma");
  if (c.seed_model_1 == c.seed_model_2) bad.push_back("seed_model_2");
  if (!bad.empty()) {
    std::string msg = "invalid config values:";
    for (const auto& key : bad) msg += " " + key;
    throw ConfigError(msg);
  }
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"seed_model_1", [](TrainConfig& c, const std::string& v) { c.seed_model_1 = parse_uint(v); }},
      {"seed_model_2", [](TrainConfig& c, const std::string& v) { c.seed_model_2 = parse_uint(v); }},
      {"seed_sampling", [](TrainConfig& c, const std::string& v) { c.seed_sampling = parse_uint(v); }},
      {"alpha", [](TrainConfig& c, const std::string& v) { c.alpha = parse_double(v); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = parse_double(v); }},
      {"momentum", [](TrainConfig& c, const std::string& v) { c.momentum = parse_double(v); }},
      {"lr_power", [](TrainConfig& c, const std::string& v) { c.lr_power = parse_double(v); }},
      {"batch_labeled", [](TrainConfig& c, const std::string& v) { c.batch_labeled = parse_uint(v); }},
      {"batch_unlabeled", [](TrainConfig& c, const std::string& v) { c.batch_unlabeled = parse_uint(v); }},
      {"max_iterations", [](TrainConfig& c, const std::string& v) { c.max_iterations = parse_uint(v); }},
      {"hidden", [](TrainConfig& c, const std::string& v) { c.hidden = parse_uint(v); }},
      {"mode", [](TrainConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      {"threshold", [](TrainConfig& c, const std::string& v) { c.threshold = parse_threshold(v); }},
      {"confidence", [](TrainConfig& c, const std::string& v) {
         if (v == "raw") c.confidence = ConfidenceSource::raw;
         else if (v == "aligned") c.confidence = ConfidenceSource::aligned;
         else throw std::invalid_argument(v);
       }},
      {"lambda_u", [](TrainConfig& c, const std::string& v) { c.lambda_u = parse_double(v); }},
      {"soft_targets", [](TrainConfig& c, const std::string& v) { c.soft_targets = parse_bool(v); }},
      {"freeze_alignment", [](TrainConfig& c, const std::string& v) { c.freeze_alignment = parse_bool(v); }},
      {"flip_probability", [](TrainConfig& c, const std::string& v) { c.flip_probability = parse_double(v); }},
      {"augment_sigma", [](TrainConfig& c, const std::string& v) { c.augment_sigma = parse_double(v); }},
      {"eval_every", [](TrainConfig& c, const std::string& v) { c.eval_every = parse_uint(v); }},
      {"absent_class", [](TrainConfig& c, const std::string& v) {
         if (v == "score_one") c.absent_class = metrics::AbsentClass::score_one;
         else if (v == "skip") c.absent_class = metrics::AbsentClass::skip;
         else throw std::invalid_argument(v);
       }},
  };
  return table;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      problems.push_back(key + " (unknown key)");
      continue;
    }
    try {
      it->second(config, value);
    } catch (const std::exception&) {
      problems.push_back(key + " (bad value '" + value + "')");
    }
  }
  if (!problems.empty()) {
    std::string msg = "config errors:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
  validate(config);
  return config;
}

TrainConfig load_config(const std::string& path) {
  return parse_config(io::read_file(path));
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "seed_model_1 = " << c.seed_model_1 << '\n'
      << "seed_model_2 = " << c.seed_model_2 << '\n'
      << "seed_sampling = " << c.seed_sampling << '\n'
      << "alpha = " << format_double(c.alpha) << '\n'
      << "lr = " << format_double(c.lr) << '\n'
      << "momentum = " << format_double(c.momentum) << '\n'
      << "lr_power = " << format_double(c.lr_power) << '\n'
      << "batch_labeled = " << c.batch_labeled << '\n'
      << "batch_unlabeled = " << c.batch_unlabeled << '\n'
      << "max_iterations = " << c.max_iterations << '\n'
      << "hidden = " << c.hidden << '\n'
      << "mode = " << to_string(c.mode) << '\n'
      << "threshold = " << to_string(c.threshold) << '\n'
      << "confidence = " << (c.confidence == ConfidenceSource::raw ? "raw" : "aligned") << '\n'
      << "lambda_u = " << format_double(c.lambda_u) << '\n'
      << "soft_targets = " << (c.soft_targets ? "true" : "false") << '\n'
      << "freeze_alignment = " << (c.freeze_alignment ? "true" : "false") << '\n'
      << "flip_probability = " << format_double(c.flip_probability) << '\n'
      << "augment_sigma = " << format_double(c.augment_sigma) << '\n'
      << "eval_every = " << c.eval_every << '\n'
      << "absent_class = "
      << (c.absent_class == metrics::AbsentClass::score_one ? "score_one" : "skip") << '\n';
  return out.str();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  std::istringstream in(format_config(c));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    j[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return j;
}

}  // namespace coda
