#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/baselines/bayesian_ridge.hpp"
#include "meterguard/baselines/elastic_net.hpp"
#include "meterguard/baselines/gbr.hpp"
#include "meterguard/detector.hpp"
#include "meterguard/lstm_predictor.hpp"
#include "meterguard/rp_classifier.hpp"
#include "meterguard/simgen.hpp"

namespace meterguard::cli {

/// Bad flags or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainingSource { automatic, reference, history };
const char* to_string(TrainingSource s);
TrainingSource parse_training_source(const std::string& s);

enum class DetectorUnits { standardized, kwh };
const char* to_string(DetectorUnits u);
DetectorUnits parse_detector_units(const std::string& s);

struct PathsSection {
  std::string data_dir = "data";
  std::string out_dir = "out";
};

struct PredictorSection {
  PredictorConfig model;
  std::size_t n_test = 27;
  // automatic: the area's pre-injection reference series when present, else history.
  TrainingSource training = TrainingSource::automatic;
  // history mode: windows whose target precedes this date train the model;
  // unset means all but the last n_test windows.
  std::optional<Date> train_until;
  bool pool_areas = false;
  std::vector<std::size_t> sweep_windows;
  int sweep_repeats = 1;
};

struct DetectorSection {
  DetectionParams params;
  DetectorUnits units = DetectorUnits::standardized;
};

struct ClassifierSection {
  TsRpConfig model;
  InputMode input_mode = InputMode::dual;
  // extra variants scored by cross-validation next to input_mode
  std::vector<InputMode> ablations;
  // accurate-meter proportions; each point regenerates the simgen corpus
  std::vector<double> proportion_sweep;
  double decision_threshold = 0.5;
};

struct BaselinesSection {
  bool enabled = true;
  std::vector<double> thresholds{0.5, 1.0, 4.0, 6.0, 8.0};  // kWh
  baselines::BayesianRidgeConfig bayesian_ridge;
  baselines::ElasticNetConfig elastic_net;
  baselines::GbrConfig gbr;
};

/// Whole-run configuration. Every key is optional; absent keys keep the module
/// defaults. When `seed` is set it replaces every section seed that the
/// document does not set explicitly.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  PathsSection paths;
  CorpusConfig simgen;
  PredictorSection predictor;
  DetectorSection detector;
  ClassifierSection classifier;
  BaselinesSection baselines;

  void validate() const;
  nlohmann::json to_json() const;
  /// Throws UsageError on unknown keys, wrong types or invalid values.
  static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::string& path);

/// Replaces the simgen/predictor/classifier seeds with `seed`.
void apply_global_seed(RunConfig& config, std::uint64_t seed);

}  // namespace meterguard::cli
