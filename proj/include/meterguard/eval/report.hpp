#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/baselines/target_rate.hpp"
#include "meterguard/date.hpp"
#include "meterguard/eval/metrics.hpp"
#include "meterguard/lstm_predictor.hpp"

namespace meterguard::eval {

/// Observed and predicted E for one area, with the bound test parameters.
struct DetectionTrace {
  std::string area_id;
  std::vector<Date> dates;
  std::vector<double> observed;
  std::vector<double> predicted;
  double threshold = 0.5;
  bool flagged = false;
  std::optional<Date> predicted_start;
  std::optional<Date> actual_start;
  std::optional<long> lag;
};

/// Out-of-fold scores of one network variant.
struct ArchitectureResult {
  std::string name;  // "sequence-only", "matrix-only", "dual"
  std::vector<int> fold;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> fold_roc_auc;
  std::vector<double> fold_pr_auc;
};

struct ProportionRow {
  double accurate_proportion = 0.0;
  std::vector<double> fold_roc_auc;
  std::vector<double> fold_pr_auc;
};

struct ReportInputs {
  std::vector<WindowSweepRow> window_sweep;
  std::vector<DetectionTrace> detections;
  std::vector<ArchitectureResult> architectures;
  std::vector<baselines::TargetRateRow> target_rates;
  std::vector<ProportionRow> proportion_sweep;
};

/// File name -> contents, plus the JSON summary (also stored as report.json).
struct ReportBundle {
  std::map<std::string, std::string> files;
  nlohmann::json summary;
  std::vector<std::string> missing;
};

/// Always produces every file; sections without inputs carry headers only and
/// are listed under "missing".
ReportBundle experiment_report(const ReportInputs& inputs);

/// Writes every file of the bundle into `dir` (created if needed).
void write_report(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace meterguard::eval
