#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <json.hpp>

#include "meterguard/data_model.hpp"
#include "meterguard/nn/layers.hpp"
#include "meterguard/nn/lstm.hpp"

namespace meterguard {

/// error, master, com_date, 7 weekday + 12 month + 3 year one-hots, submeter count.
inline constexpr std::size_t kFeatureDim = 26;

/// One day of predictor input in raw units (kWh, days, count).
struct FeatureVector {
  Date date;
  double error = 0.0;
  double master = 0.0;
  long com_date = 0;
  std::array<std::uint8_t, 7> weekday_onehot{};
  std::array<std::uint8_t, 12> month_onehot{};
  std::array<std::uint8_t, 3> year_onehot{};
  double number = 0.0;
};

/// z-score transform; a zero spread maps to unit scale so constants become 0.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(std::span<const double> values);
  double apply(double x) const { return (x - mean) / scale; }
  double invert(double z) const { return z * scale + mean; }
};

struct FeatureScaler {
  Standardizer error, master, com_date, number;

  /// Fits on the given (training) days only.
  static FeatureScaler fit(std::span<const FeatureVector> features);
  std::array<double, kFeatureDim> encode(const FeatureVector& f) const;

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);
};

/// One vector per cleaned date; the base date is the first date of the dataset.
std::vector<FeatureVector> build_features(const UsageDataset& dataset);

/// Days [start, start + window) predict day target_index = start + window.
struct WindowSample {
  std::size_t start = 0;
  std::size_t window = 0;
  std::size_t target_index = 0;
  double target = 0.0;  // E in kWh
};

/// Stride-1 windows; returns len - W samples. Throws std::invalid_argument if
/// fewer than W + 1 days are available or targets and features disagree in length.
std::vector<WindowSample> make_windows(std::span<const FeatureVector> features,
                                       std::span<const double> targets, std::size_t window);

struct TrainTestSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> test;
};

/// Chronological split: the last n_test samples form the test set.
TrainTestSplit split_train_test(std::span<const WindowSample> samples, std::size_t n_test);

struct PredictorConfig {
  std::size_t window = 40;
  std::vector<std::size_t> hidden{30, 30};
  int epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double validation_fraction = 0.1;
  int patience = 20;
  double clip_norm = 1.0;
  double weight_decay = 0.0;
  nn::CellVariant cell = nn::CellVariant::standard;
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  static PredictorConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // equals train_mse when there is no validation tail
};

/// LSTM stack -> dense(1) trained on standardized E. Inference serializes on an
/// internal mutex, so a trained predictor can be shared between threads.
class TrainedPredictor {
 public:
  explicit TrainedPredictor(const PredictorConfig& config);

  TrainedPredictor(TrainedPredictor&&) = default;
  TrainedPredictor& operator=(TrainedPredictor&&) = default;

  nn::Sequential& net() { return *net_; }
  const PredictorConfig& config() const { return config_; }

  /// Standardized prediction for each window start (inputs features[s, s + W)).
  std::vector<double> predict_standardized(std::span<const FeatureVector> features,
                                           std::span<const std::size_t> starts,
                                           const FeatureScaler& scaler) const;

  nlohmann::json to_checkpoint() const;
  static TrainedPredictor from_checkpoint(const nlohmann::json& checkpoint);

  FeatureScaler scaler;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double final_train_mse = 0.0;
  double best_val_mse = 0.0;

 private:
  PredictorConfig config_;
  std::unique_ptr<nn::Sequential> net_;
  std::unique_ptr<std::mutex> mutex_;
};

/// Builds the network for `config` (two LSTM layers by default, then dense(1)).
std::unique_ptr<nn::Sequential> build_predictor_network(const PredictorConfig& config);

/// Encodes [B, W, 26] inputs for the given window starts.
nn::Tensor encode_windows(std::span<const FeatureVector> features,
                          std::span<const std::size_t> starts, std::size_t window,
                          const FeatureScaler& scaler);

/// Trains on `train` windows with MSE on standardized E. The scaler is fitted
/// on days up to the last training target. Deterministic given config.seed.
/// Throws std::runtime_error on non-finite loss.
TrainedPredictor train_predictor(std::span<const FeatureVector> features,
                                 std::span<const WindowSample> train, const PredictorConfig& config);

/// One area's contribution to a pooled model.
struct AreaSeries {
  std::span<const FeatureVector> features;
  std::span<const WindowSample> train;
};

/// Trains one network on several areas; each area is standardized with its
/// own training statistics. The returned scaler is the first area's.
TrainedPredictor train_predictor_pooled(std::span<const AreaSeries> areas,
                                        const PredictorConfig& config,
                                        std::vector<FeatureScaler>* area_scalers = nullptr);

struct PredictionSeries {
  std::vector<Date> dates;
  std::vector<double> observed;     // E, kWh
  std::vector<double> predicted;    // p, kWh
  std::vector<double> observed_z;   // standardized with the model's error statistics
  std::vector<double> predicted_z;
};

/// One-step-ahead predictions for target days first_target .. end. Throws
/// std::invalid_argument when first_target < W.
PredictionSeries predict_series(const TrainedPredictor& model,
                                std::span<const FeatureVector> features, std::size_t first_target,
                                const FeatureScaler* scaler = nullptr);

struct WindowSweepRow {
  std::size_t window = 0;
  double mse_mean = 0.0;  // standardized units, over the test samples
  double mse_std = 0.0;
  int runs = 0;
};

/// Trains one model per (window, repeat) and scores the last n_test samples.
std::vector<WindowSweepRow> window_sweep(std::span<const FeatureVector> features,
                                         std::span<const std::size_t> windows, std::size_t n_test,
                                         const PredictorConfig& config, int repeats);

}  // namespace meterguard
