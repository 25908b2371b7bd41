#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/eval/metrics.hpp"
#include "meterguard/nn/layers.hpp"
#include "meterguard/recurrence_plot.hpp"
#include "meterguard/simgen.hpp"

namespace meterguard {

/// conv (same padding, stride 1) -> relu -> non-overlapping max pool.
struct ConvBlock {
  std::size_t filters = 8;
  std::size_t kernel = 3;
  std::size_t pool = 2;
};

enum class InputMode { dual, sequence_only, matrix_only };
const char* to_string(InputMode mode);
InputMode parse_input_mode(const std::string& s);

enum class MergeMode { add, concat };
const char* to_string(MergeMode mode);
MergeMode parse_merge_mode(const std::string& s);

struct TsRpConfig {
  std::size_t length = 128;  // T, days
  RpMode rp_mode = RpMode::binary;
  double eps_percentile = 10.0;
  std::vector<ConvBlock> sequence_blocks{{8, 5, 2}, {16, 5, 2}, {16, 5, 2}};
  std::vector<ConvBlock> matrix_blocks{{4, 3, 2}, {8, 3, 2}, {8, 3, 4}};
  std::size_t merge_width = 32;  // d
  MergeMode merge = MergeMode::add;
  int epochs = 40;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  std::uint64_t seed = 11;
  int folds = 5;

  void validate() const;
  nlohmann::json to_json() const;
  static TsRpConfig from_json(const nlohmann::json& j);
};

struct SubmeterSample {
  std::string area_id;
  std::string meter_id;
  std::vector<double> series;  // length T, standardized, left-padded with zeros
  RecurrencePlot rp;
  int label = -1;  // 1 = inaccurate, 0 = accurate, -1 = unknown
};

/// Keeps the most recent T readings, z-scores them (a constant series becomes
/// zeros) and left-pads with zeros. Throws std::invalid_argument when empty.
std::vector<double> prepare_series(std::span<const double> raw, std::size_t length);

SubmeterSample make_sample(const std::string& area_id, const std::string& meter_id,
                           std::span<const double> raw, int label, const TsRpConfig& config);

/// One sample per submeter of `dataset` in meter-id order. Meters absent from
/// `labels` (or all of them when labels is null) get label -1.
std::vector<SubmeterSample> prepare_samples(const UsageDataset& dataset,
                                            const std::map<std::string, MeterLabel>* labels,
                                            const TsRpConfig& config);

/// Labeled samples for every submeter of every area, areas in order.
std::vector<SubmeterSample> prepare_samples(std::span<const LabeledArea> areas, const TsRpConfig& config);

/// Dual-input network: a 1D conv branch over the series and a 2D conv branch
/// over the recurrence plot, each ending in dense(d) + relu, merged and fed to
/// dense(1). forward() returns logits [B, 1]. Inference through predict() is
/// serialized, so a trained model may be shared across threads.
class TsRpModel {
 public:
  TsRpModel(const TsRpConfig& config, InputMode mode);

  TsRpModel(TsRpModel&&) = default;
  TsRpModel& operator=(TsRpModel&&) = default;

  /// seq [B, T, 1], rp [B, T, T, 1]; an unused branch's input may be empty.
  nn::Tensor forward(const nn::Tensor& seq, const nn::Tensor& rp);
  /// Accumulates parameter gradients from d loss / d logits.
  void backward(const nn::Tensor& grad_logits);

  std::vector<nn::Parameter*> parameters();
  void initialize(std::uint64_t seed);
  nlohmann::json describe() const;

  /// Probability of "inaccurate" per sample.
  std::vector<double> predict(std::span<const SubmeterSample> samples) const;

  InputMode mode() const { return mode_; }
  const TsRpConfig& config() const { return config_; }
  nn::Sequential* sequence_branch() { return seq_.get(); }
  nn::Sequential* matrix_branch() { return mat_.get(); }
  nn::Sequential& head() { return *head_; }

  nlohmann::json to_checkpoint() const;
  static TsRpModel from_checkpoint(const nlohmann::json& checkpoint);

  std::vector<double> loss_curve;  // mean training loss per epoch

 private:
  TsRpConfig config_;
  InputMode mode_;
  std::unique_ptr<nn::Sequential> seq_, mat_, head_;
  std::unique_ptr<std::mutex> mutex_;
  std::size_t batch_ = 0;
};

/// Batched inputs for the given samples.
nn::Tensor sequence_batch(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx);
nn::Tensor matrix_batch(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx);

/// BCE training on samples[idx]; deterministic given config.seed.
TsRpModel train_classifier(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx,
                           const TsRpConfig& config, InputMode mode);

struct CvResult {
  std::vector<int> fold;            // per sample
  std::vector<double> oof_scores;   // out-of-fold probability per sample
  std::vector<double> fold_roc_auc;
  std::vector<double> fold_pr_auc;
  eval::MeanStd roc;
  eval::MeanStd pr;
};

/// Stratified k-fold CV; fold f trains with seed config.seed + f. Folds run on
/// up to `jobs` threads; results do not depend on the thread count.
CvResult train_cv(std::span<const SubmeterSample> samples, const TsRpConfig& config, InputMode mode,
                  int jobs = 1);

/// area_id,meter_id,score,label_pred,label_true (label_true empty when unknown)
std::string classification_csv(std::span<const SubmeterSample> samples, std::span<const double> scores,
                               double decision_threshold = 0.5);

}  // namespace meterguard
