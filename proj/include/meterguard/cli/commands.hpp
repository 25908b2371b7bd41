#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/cli/config.hpp"
#include "meterguard/eval/report.hpp"

namespace meterguard::cli {

namespace fs = std::filesystem;

/// Directory layout of a pipeline run below its output directory.
struct RunLayout {
  fs::path data, out, clean, predictor, detect, baselines, classify, report;

  static RunLayout under(const fs::path& data_dir, const fs::path& out_dir);
};

/// Pipeline stages in execution order.
inline const std::vector<std::string> kStages{"clean",    "train-predictor",  "detect",
                                              "baselines", "train-classifier", "report"};

/// Writes `<id>.csv`, `<id>.reference.csv`, `<id>.labels.json` per area and
/// corpus.json; returns the corpus summary.
nlohmann::json generate_corpus(const CorpusConfig& config, const fs::path& dir);

/// Cleaned CSVs (observed and reference), removed-days JSON and a copy of the
/// labels per area.
void clean_areas(const std::vector<fs::path>& csvs, const fs::path& out);

/// One predictor per area (or one pooled model) plus predictions CSVs and
/// training_report.json.
void train_predictors(const RunConfig& config, const fs::path& clean_dir, const fs::path& out, int jobs);

/// Detection JSON and trace CSV per area, plus detections.json; returns the
/// detections.json document.
nlohmann::json detect_areas(const RunConfig& config, const fs::path& clean_dir, const fs::path& predictor_dir,
                            const fs::path& out, int jobs);

/// Target-rate comparison of the classical regressors against the LSTM over
/// each malfunction horizon.
void compare_baselines(const RunConfig& config, const fs::path& clean_dir, const fs::path& predictor_dir,
                       const fs::path& detect_dir, const fs::path& out, int jobs);

struct ClassifierOptions {
  std::optional<fs::path> detections;  // gate on flagged areas when set
  bool classify_all = false;
  std::optional<fs::path> checkpoint;  // score with this model instead of training
  int jobs = 1;
};

struct ClassifierOutcome {
  bool skipped = false;
  std::string reason;
  std::size_t areas = 0;
  std::size_t samples = 0;
};

/// Cross-validates and trains the TS-RP classifier on the selected areas (or
/// scores them with a given checkpoint) and writes classification.csv,
/// fold_report.json, model.checkpoint.json and proportion_sweep.json.
ClassifierOutcome run_classifier(const RunConfig& config, const std::vector<fs::path>& raw_csvs,
                                 const ClassifierOptions& options, const fs::path& out);

/// Rebuilds the report bundle from the artifacts of a pipeline run.
eval::ReportBundle report_from_run(const RunLayout& layout);

enum class OutputFormat { csv, json };

/// Metrics of a scored classification CSV. Labels come from the given labels
/// files or directories, else from its label_true column. Throws
/// std::runtime_error naming every missing input.
std::map<std::string, std::string> evaluate_scores(const fs::path& scores_csv, const std::vector<fs::path>& labels,
                                                   OutputFormat format, double decision_threshold = 0.5);

/// Entry point; returns the process exit code (0 ok, 1 runtime failure,
/// 2 usage or configuration error). args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace meterguard::cli
