#include "coda/run_io.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "coda/error.hpp"
#include "coda/image_io.hpp"

namespace coda::run {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument(item);
  }
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_number(values[i]);
  }
  return out;
}

const char* shape_name(synth::ShapeKind kind) {
  switch (kind) {
    case synth::ShapeKind::disk: return "disk";
    case synth::ShapeKind::rectangle: return "rectangle";
    case synth::ShapeKind::ring: return "ring";
  }
  return "disk";
}

synth::ShapeKind parse_shape(const std::string& name) {
  if (name == "disk") return synth::ShapeKind::disk;
  if (name == "rectangle") return synth::ShapeKind::rectangle;
  if (name == "ring") return synth::ShapeKind::ring;
  throw std::invalid_argument(name);
}

std::string image_stem(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%03zu", id);
  return buf;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

synth::SceneSpec parse_scene_spec(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("'" + line + "' (expected key = value)");
      continue;
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  synth::SceneSpec spec;
  std::optional<double> rho;
  for (const auto& [key, value] : entries) {
    if (key == "preset") {
      if (value != "tail5") problems.push_back("preset (unknown '" + value + "')");
      else spec = synth::tail5();
    }
  }
  for (const auto& [key, value] : entries) {
    try {
      if (key == "preset") continue;
      if (key == "height") spec.height = std::stoul(value);
      else if (key == "width") spec.width = std::stoul(value);
      else if (key == "classes") spec.classes = std::stoul(value);
      else if (key == "frequencies") spec.frequencies = parse_list(value);
      else if (key == "rho") rho = std::stod(value);
      else if (key == "class_means") spec.class_means = parse_list(value);
      else if (key == "noise_sigma") spec.noise_sigma = std::stod(value);
      else if (key == "labeled_fraction") spec.labeled_fraction = std::stod(value);
      else if (key == "images") spec.images = std::stoul(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "palette") {
        spec.palette.clear();
        std::stringstream names(value);
        std::string name;
        while (std::getline(names, name, ',')) spec.palette.push_back(parse_shape(trim(name)));
      } else {
        problems.push_back(key + " (unknown key)");
      }
    } catch (const std::exception&) {
      problems.push_back(key + " (bad value '" + value + "')");
    }
  }
  if (!problems.empty()) {
    std::string msg = "scene spec errors:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
  if (rho) spec.frequencies = synth::long_tail_frequencies(spec.classes, *rho);
  if (spec.class_means.empty()) spec.class_means = synth::spaced_means(spec.classes);
  synth::validate_spec(spec);
  return spec;
}

std::string format_scene_spec(const synth::SceneSpec& spec) {
  std::ostringstream out;
  out << "height = " << spec.height << '\n'
      << "width = " << spec.width << '\n'
      << "classes = " << spec.classes << '\n'
      << "frequencies = " << join(spec.frequencies) << '\n'
      << "class_means = " << join(spec.class_means) << '\n'
      << "palette = ";
  for (std::size_t i = 0; i < spec.palette.size(); ++i) {
    out << (i ? ", " : "") << shape_name(spec.palette[i]);
  }
  out << '\n'
      << "noise_sigma = " << format_number(spec.noise_sigma) << '\n'
      << "labeled_fraction = " << format_number(spec.labeled_fraction) << '\n'
      << "images = " << spec.images << '\n'
      << "seed = " << spec.seed << '\n';
  return out.str();
}

nlohmann::json to_json(const synth::SceneSpec& spec) {
  nlohmann::json j;
  j["height"] = spec.height;
  j["width"] = spec.width;
  j["classes"] = spec.classes;
  j["frequencies"] = spec.frequencies;
  j["class_means"] = spec.class_means;
  std::vector<std::string> palette;
  for (auto kind : spec.palette) palette.emplace_back(shape_name(kind));
  j["palette"] = palette;
  j["noise_sigma"] = spec.noise_sigma;
  j["labeled_fraction"] = spec.labeled_fraction;
  j["images"] = spec.images;
  j["seed"] = spec.seed;
  j["text"] = format_scene_spec(spec);
  return j;
}

void write_dataset(const fs::path& dir, const synth::SceneSpec& spec,
                   const DatasetSplit& split) {
  validate_split(split);
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  fs::create_directories(dir / "labels", ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  nlohmann::json files = nlohmann::json::array();
  const auto add = [&](std::size_t id, const FeatureImage& image,
                       const LabelMap& labels, const char* role) {
    const auto stem = image_stem(id);
    const auto feature_path = fs::path("features") / (stem + ".cpm");
    const auto label_path = fs::path("labels") / (stem + ".pgm");
    io::write_feature_image(dir / feature_path, image);
    io::write_pgm(dir / label_path, labels);
    files.push_back({{"id", id},
                     {"role", role},
                     {"features", feature_path.generic_string()},
                     {"labels", label_path.generic_string()}});
  };
  for (std::size_t i = 0; i < split.labeled.size(); ++i) {
    add(split.labeled_ids[i], split.labeled[i].features, split.labeled[i].labels,
        "labeled");
  }
  for (std::size_t i = 0; i < split.unlabeled.size(); ++i) {
    add(split.unlabeled_ids[i], split.unlabeled[i], split.hidden_truth[i],
        "unlabeled");
  }

  nlohmann::json manifest;
  manifest["format"] = "coda-dataset-1";
  manifest["spec"] = to_json(spec);
  manifest["classes"] = split.classes;
  manifest["feature_dim"] = split.feature_dim;
  manifest["split"] = {{"labeled", split.labeled_ids},
                       {"unlabeled", split.unlabeled_ids}};
  manifest["files"] = files;
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetSplit read_dataset(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  DatasetSplit split;
  try {
    split.classes = manifest.at("classes").get<std::size_t>();
    split.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    for (const auto& entry : manifest.at("files")) {
      const auto id = entry.at("id").get<std::size_t>();
      const auto role = entry.at("role").get<std::string>();
      auto features = io::read_feature_image(dir / entry.at("features").get<std::string>());
      auto labels = io::read_pgm(dir / entry.at("labels").get<std::string>());
      if (labels.classes() != split.classes) {
        throw DimensionError("label file class count differs from the manifest");
      }
      if (role == "labeled") {
        split.labeled.push_back({std::move(features), std::move(labels)});
        split.labeled_ids.push_back(id);
      } else if (role == "unlabeled") {
        split.unlabeled.push_back(std::move(features));
        split.hidden_truth.push_back(std::move(labels));
        split.unlabeled_ids.push_back(id);
      } else {
        throw IoError("unknown role '" + role + "' in manifest");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  validate_split(split);
  return split;
}

std::string csv_header(std::size_t classes) {
  std::string out = "iter,L_s,L_u,mask_frac_1,mask_frac_2,mIoU_1,mIoU_2";
  for (const char* name : {"m1_Ml", "m1_Mu", "m2_Ml", "m2_Mu"}) {
    for (std::size_t k = 0; k < classes; ++k) {
      out += ",";
      out += name;
      out += "_" + std::to_string(k);
    }
  }
  return out + "\n";
}

std::string csv_row(const IterationRecord& r) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
  };
  std::string out = std::to_string(r.iteration) + "," +
                    format_number(r.loss_supervised) + "," + opt(r.loss_unlabeled) +
                    "," + format_number(r.mask_fraction[0]) + "," +
                    format_number(r.mask_fraction[1]) + "," + opt(r.miou[0]) + "," +
                    opt(r.miou[1]);
  for (std::size_t m = 0; m < 2; ++m) {
    for (const auto* diag : {&r.labeled_diag[m], &r.unlabeled_diag[m]}) {
      for (double v : *diag) out += "," + format_number(v);
    }
  }
  return out + "\n";
}

nlohmann::json summary_json(const TrainConfig& config, const TrainResult& result,
                            const ModelEvaluation& final_eval,
                            double wall_seconds) {
  nlohmann::json j;
  j["config"] = to_json(config);
  j["best_miou"] = result.best_miou ? nlohmann::json(*result.best_miou) : nlohmann::json();
  j["best_iteration"] = result.best_iteration;
  j["final"] = {{"model_1", metrics::to_json(final_eval.models[0])},
                {"model_2", metrics::to_json(final_eval.models[1])},
                {"better", final_eval.better + 1}};
  const auto& best = final_eval.models[final_eval.better];
  std::vector<double> iou, dice;
  for (const auto& c : best.per_class) {
    iou.push_back(c.iou);
    dice.push_back(c.dice);
  }
  j["miou"] = best.miou;
  j["per_class_iou"] = iou;
  j["per_class_dice"] = dice;
  j["asd"] = best.asd ? nlohmann::json(*best.asd) : nlohmann::json();
  j["hd95"] = best.hd95 ? nlohmann::json(*best.hd95) : nlohmann::json();
  j["fallback_count"] = {result.alignment[0].fallback_count,
                         result.alignment[1].fallback_count};
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : result.records) {
    nlohmann::json h;
    h["iter"] = r.iteration;
    h["L_s"] = r.loss_supervised;
    h["L_u"] = r.loss_unlabeled ? nlohmann::json(*r.loss_unlabeled) : nlohmann::json();
    h["mask_frac"] = r.mask_fraction;
    history.push_back(std::move(h));
  }
  j["history"] = std::move(history);
  j["wall_clock_seconds"] = wall_seconds;
  return j;
}

void write_models(const fs::path& dir, const TrainResult& result) {
  for (std::size_t m = 0; m < 2; ++m) {
    const auto idx = std::to_string(m + 1);
    io::write_file(dir / ("model_" + idx + ".ckpt"), encode_checkpoint(result.models[m]));
    io::write_file(dir / ("best_model_" + idx + ".ckpt"),
                   encode_checkpoint(result.best_models[m]));
    io::write_file(dir / ("alignment_" + idx + ".txt"),
                   serialize_alignment(result.alignment[m]));
  }
}

}  // namespace coda::run
