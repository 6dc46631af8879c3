#pragma once

// On-disk layout of datasets and training runs.
//
// Dataset directory:
//   manifest.json          scene spec echo, split, file list
//   features/img_NNN.cpm   per-pixel features (CODAPMAP)
//   labels/img_NNN.pgm     ground-truth labels (PGM)
//
// Run directory:
//   config.txt, iterations.csv, summary.json,
//   model_{1,2}.ckpt, alignment_{1,2}.txt

#include <filesystem>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "coda/config.hpp"
#include "coda/cotrain.hpp"
#include "coda/synthdata.hpp"

namespace coda::run {

/// Flat `key = value` scene spec. `preset = tail5` seeds every field with the
/// standard benchmark before the remaining keys override it. List values are
/// comma separated.
synth::SceneSpec parse_scene_spec(const std::string& text);
std::string format_scene_spec(const synth::SceneSpec& spec);
nlohmann::json to_json(const synth::SceneSpec& spec);

void write_dataset(const std::filesystem::path& dir,
                   const synth::SceneSpec& spec, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

std::string csv_header(std::size_t classes);
std::string csv_row(const IterationRecord& record);

nlohmann::json summary_json(const TrainConfig& config, const TrainResult& result,
                            const ModelEvaluation& final_eval,
                            double wall_seconds);

/// Writes checkpoints and alignment dumps of `result` into `dir`.
void write_models(const std::filesystem::path& dir, const TrainResult& result);

std::string format_number(double v);

}  // namespace coda::run
