#include "coda/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "coda/cotrain.hpp"
#include "coda/error.hpp"
#include "coda/run_io.hpp"
#include "coda/synthdata.hpp"

namespace coda {

std::vector<double> static_threshold_grid() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

std::vector<AblationRun> ablation_plan(const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRun> plan;
  for (auto seed : seeds) {
    for (auto mode : {TrainMode::supervised_only, TrainMode::cotrain,
                      TrainMode::cotrain_da, TrainMode::cotrain_oe,
                      TrainMode::cotrain_coda}) {
      plan.push_back({mode, ThresholdRule::dynamic(), seed});
    }
    plan.push_back({TrainMode::coda_oe, ThresholdRule::dynamic(), seed});
    for (double t : static_threshold_grid()) {
      plan.push_back({TrainMode::coda_oe, ThresholdRule::fixed(t), seed});
    }
  }
  return plan;
}

std::vector<std::size_t> minority_classes(const DatasetSplit& split) {
  std::vector<LabelMap> maps;
  for (const auto& s : split.labeled) maps.push_back(s.labels);
  const auto freq = synth::empirical_distribution(maps);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < freq.size(); ++k) {
    if (freq[k] < 0.03) out.push_back(k);
  }
  if (out.empty()) {
    out.push_back(static_cast<std::size_t>(
        std::min_element(freq.begin(), freq.end()) - freq.begin()));
  }
  return out;
}

AblationRow run_ablation(const TrainConfig& base, const DatasetSplit& split,
                         const AblationRun& run) {
  TrainConfig config = base;
  config.mode = run.mode;
  config.threshold = run.threshold;
  apply_run_seed(config, run.seed);
  const auto eval = evaluation_set(split);
  const auto result = train(config, training_data(split), nullptr);
  const auto scores = evaluate(result.models, eval, config.absent_class);
  const auto& report = scores.models[scores.better];
  AblationRow row{run, report.miou, 0.0};
  const auto tail = minority_classes(split);
  for (auto k : tail) row.minority_iou += report.per_class[k].iou;
  row.minority_iou /= static_cast<double>(tail.size());
  return row;
}

std::vector<AblationRow> run_ablations(
    const TrainConfig& base, const DatasetSplit& split,
    const std::vector<AblationRun>& plan, std::size_t workers,
    const std::function<void(const AblationRow&)>& on_done) {
  std::vector<AblationRow> rows(plan.size());
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::exception_ptr failure;
  const auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= plan.size()) return;
      try {
        rows[i] = run_ablation(base, split, plan[i]);
        if (on_done) {
          std::lock_guard lock(guard);
          on_done(rows[i]);
        }
      } catch (...) {
        std::lock_guard lock(guard);
        if (!failure) failure = std::current_exception();
        next = plan.size();
        return;
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, plan.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<AblationAggregate> aggregate(const std::vector<AblationRow>& rows) {
  std::vector<AblationAggregate> out;
  std::vector<std::vector<const AblationRow*>> groups;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AblationAggregate& a) {
      return a.mode == row.run.mode && a.threshold == row.run.threshold;
    });
    if (it == out.end()) {
      out.push_back({row.run.mode, row.run.threshold});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&row);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    const auto& members = groups[g];
    const double n = static_cast<double>(members.size());
    auto& a = out[g];
    a.count = members.size();
    for (const auto* r : members) {
      a.miou_mean += r->miou;
      a.minority_mean += r->minority_iou;
    }
    a.miou_mean /= n;
    a.minority_mean /= n;
    if (members.size() > 1) {
      for (const auto* r : members) {
        a.miou_std += (r->miou - a.miou_mean) * (r->miou - a.miou_mean);
        a.minority_std +=
            (r->minority_iou - a.minority_mean) * (r->minority_iou - a.minority_mean);
      }
      a.miou_std = std::sqrt(a.miou_std / (n - 1.0));
      a.minority_std = std::sqrt(a.minority_std / (n - 1.0));
    }
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "mode,threshold,seed,mIoU,minority_IoU\n";
  for (const auto& r : rows) {
    out += to_string(r.run.mode) + "," + to_string(r.run.threshold) + "," +
           std::to_string(r.run.seed) + "," + run::format_number(r.miou) + "," +
           run::format_number(r.minority_iou) + "\n";
  }
  for (const auto& a : aggregate(rows)) {
    const auto prefix = to_string(a.mode) + "," + to_string(a.threshold) + ",";
    out += prefix + "mean," + run::format_number(a.miou_mean) + "," +
           run::format_number(a.minority_mean) + "\n";
    out += prefix + "std," + run::format_number(a.miou_std) + "," +
           run::format_number(a.minority_std) + "\n";
  }
  return out;
}

}  // namespace coda
