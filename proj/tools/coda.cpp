// coda: dataset generation, training, evaluation and ablation sweeps.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coda/ablation.hpp"
#include "coda/cotrain.hpp"
#include "coda/error.hpp"
#include "coda/image_io.hpp"
#include "coda/run_io.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef CODA_SOURCE_REVISION
#define CODA_SOURCE_REVISION "unknown"
#endif

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw coda::IoError("cannot create directory " + dir.string() +
                        (ec ? ": " + ec.message() : ""));
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw coda::ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw coda::ConfigError("empty seed list");
  return seeds;
}

std::size_t thread_cap() {
  if (const char* env = std::getenv("CODA_THREADS")) {
    try {
      const auto n = std::stoul(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw coda::ConfigError("CODA_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Overrides {
  std::string config;
  std::string mode;
  std::string threshold;
  std::string seeds;
};

coda::TrainConfig load_train_config(const Overrides& o) {
  coda::TrainConfig config;
  if (!o.config.empty()) config = coda::load_config(o.config);
  if (!o.mode.empty()) config.mode = coda::parse_mode(o.mode);
  if (!o.threshold.empty()) config.threshold = coda::parse_threshold(o.threshold);
  if (!o.seeds.empty()) {
    const auto seeds = parse_seeds(o.seeds);
    if (seeds.size() != 1) throw coda::ConfigError("train takes a single --seeds value");
    coda::apply_run_seed(config, seeds.front());
  }
  coda::validate(config);
  return config;
}

int cmd_generate(const std::string& spec_path, const fs::path& out) {
  const auto spec = spec_path.empty() ? coda::synth::tail5()
                                      : coda::run::parse_scene_spec(coda::io::read_file(spec_path));
  const auto split = coda::synth::generate(spec);
  ensure_dir(out);
  coda::run::write_dataset(out, spec, split);
  std::cout << "wrote " << split.labeled.size() << " labeled and "
            << split.unlabeled.size() << " unlabeled images to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Overrides& o, const fs::path& data, const fs::path& out) {
  const auto config = load_train_config(o);
  const auto split = coda::run::read_dataset(data);
  ensure_dir(out);
  const auto started = timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  coda::io::write_file(out / "config.txt", coda::format_config(config));

  const auto csv_path = out / "iterations.csv";
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw coda::IoError("cannot write " + csv_path.string());
  csv << coda::run::csv_header(split.classes);
  const auto eval = coda::evaluation_set(split);
  const auto sink = [&](const coda::IterationRecord& r) {
    csv << coda::run::csv_row(r);
    csv.flush();
  };
  const auto result = coda::train(config, coda::training_data(split), &eval, sink);
  csv.close();
  if (!csv) throw coda::IoError("failed writing " + csv_path.string());

  coda::run::write_models(out, result);
  const auto final_eval = coda::evaluate(result.models, eval, config.absent_class);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  coda::io::write_file(out / "summary.json",
                       coda::run::summary_json(config, result, final_eval, seconds).dump(2) + "\n");

  if (coda::parse_config(coda::format_config(config)) != config) {
    throw coda::ConfigError("config echo does not round-trip");
  }
  nlohmann::json manifest;
  manifest["config"] = coda::to_json(config);
  manifest["dataset_manifest"] = (fs::absolute(data) / "manifest.json").string();
  manifest["outputs"] = {"config.txt", "iterations.csv", "summary.json",
                         "model_1.ckpt", "model_2.ckpt", "best_model_1.ckpt",
                         "best_model_2.ckpt", "alignment_1.txt", "alignment_2.txt"};
  manifest["source_revision"] = CODA_SOURCE_REVISION;
  manifest["started"] = started;
  manifest["finished"] = timestamp();
  coda::io::write_file(out / "run_manifest.json", manifest.dump(2) + "\n");
  for (const auto& name : manifest["outputs"]) {
    if (!fs::exists(out / name.get<std::string>())) {
      throw coda::IoError("missing output " + name.get<std::string>());
    }
  }
  std::cout << "final mIoU " << final_eval.models[final_eval.better].miou
            << " (model " << final_eval.better + 1 << "), " << seconds << " s\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const fs::path& data,
             const std::string& out) {
  if (checkpoints.size() != 2) throw coda::ConfigError("eval needs two --checkpoint paths");
  const auto split = coda::run::read_dataset(data);
  std::array<coda::SegmenterState, 2> models{
      coda::decode_checkpoint(coda::io::read_file(checkpoints[0])),
      coda::decode_checkpoint(coda::io::read_file(checkpoints[1]))};
  const auto result = coda::evaluate(models, coda::evaluation_set(split));
  nlohmann::json report;
  report["model_1"] = coda::metrics::to_json(result.models[0]);
  report["model_2"] = coda::metrics::to_json(result.models[1]);
  report["better"] = result.better + 1;
  const auto text = report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    coda::io::write_file(out, text);
  }
  return 0;
}

int cmd_ablate(const Overrides& o, const fs::path& data, const fs::path& out) {
  coda::TrainConfig base;
  if (!o.config.empty()) base = coda::load_config(o.config);
  const auto seeds = parse_seeds(o.seeds.empty() ? "1,2,3,4,5" : o.seeds);
  const auto split = coda::run::read_dataset(data);
  ensure_dir(out);
  const auto plan = coda::ablation_plan(seeds);
  const auto rows = coda::run_ablations(
      base, split, plan, thread_cap(), [](const coda::AblationRow& r) {
        std::cout << coda::to_string(r.run.mode) << " "
                  << coda::to_string(r.run.threshold) << " seed " << r.run.seed
                  << ": mIoU " << r.miou << ", minority IoU " << r.minority_iou
                  << std::endl;
      });
  coda::io::write_file(out / "ablation.csv", coda::ablation_csv(rows));
  std::cout << "wrote " << (out / "ablation.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-distribution alignment segmentation lab"};
  app.require_subcommand(1);

  Overrides o;
  std::string data, out, spec;
  std::vector<std::string> checkpoints;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", spec, "Scene spec file (default: tail5)");
  gen->add_option("--out", out, "Dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a co-trained model pair");
  train->add_option("--config", o.config, "Training config file");
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--out", out, "Run directory")->required();
  train->add_option("--mode", o.mode, "Override the training mode");
  train->add_option("--threshold", o.threshold, "Override the threshold rule");
  train->add_option("--seeds", o.seeds, "Run seed (derives the three RNG seeds)");

  auto* eval = app.add_subcommand("eval", "Evaluate two checkpoints");
  eval->add_option("--checkpoint", checkpoints, "Checkpoint path (twice)")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--out", out, "Report path (default: stdout)");

  auto* ablate = app.add_subcommand("ablate", "Run the mode and threshold matrix");
  ablate->add_option("--config", o.config, "Base training config file");
  ablate->add_option("--data", data, "Dataset directory")->required();
  ablate->add_option("--out", out, "Output directory")->required();
  ablate->add_option("--seeds", o.seeds, "Comma-separated seed list (default 1,2,3,4,5)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(spec, out);
    if (*train) return cmd_train(o, data, out);
    if (*eval) return cmd_eval(checkpoints, data, out);
    if (*ablate) return cmd_ablate(o, data, out);
  } catch (const coda::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
