#include "meterguard/rp_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "meterguard/nn/checkpoint.hpp"
#include "meterguard/nn/loss.hpp"
#include "meterguard/nn/optimizer.hpp"
#include "meterguard/usage_csv.hpp"

namespace meterguard {

using nlohmann::json;

const char* to_string(InputMode mode) {
  switch (mode) {
    case InputMode::dual: return "dual";
    case InputMode::sequence_only: return "sequence";
    case InputMode::matrix_only: return "matrix";
  }
  return "dual";
}

InputMode parse_input_mode(const std::string& s) {
  if (s == "dual") return InputMode::dual;
  if (s == "sequence" || s == "sequence-only") return InputMode::sequence_only;
  if (s == "matrix" || s == "matrix-only") return InputMode::matrix_only;
  throw std::invalid_argument("unknown input mode '" + s + "'");
}

const char* to_string(MergeMode mode) { return mode == MergeMode::add ? "add" : "concat"; }

MergeMode parse_merge_mode(const std::string& s) {
  if (s == "add") return MergeMode::add;
  if (s == "concat") return MergeMode::concat;
  throw std::invalid_argument("unknown merge mode '" + s + "'");
}

namespace {

json blocks_json(const std::vector<ConvBlock>& blocks) {
  json arr = json::array();
  for (const auto& b : blocks) arr.push_back({{"filters", b.filters}, {"kernel", b.kernel}, {"pool", b.pool}});
  return arr;
}

std::vector<ConvBlock> blocks_from(const json& j) {
  std::vector<ConvBlock> out;
  for (const auto& b : j) {
    for (const auto& [key, _] : b.items()) {
      if (key != "filters" && key != "kernel" && key != "pool") {
        throw std::invalid_argument("unknown conv block key '" + key + "'");
      }
    }
    out.push_back({b.at("filters").get<std::size_t>(), b.at("kernel").get<std::size_t>(),
                   b.at("pool").get<std::size_t>()});
  }
  return out;
}

std::size_t pooled_extent(std::size_t length, const std::vector<ConvBlock>& blocks) {
  for (const auto& b : blocks) length /= b.pool;
  return length;
}

}  // namespace

void TsRpConfig::validate() const {
  if (length < 2) throw std::invalid_argument("classifier length T must be >= 2");
  if (eps_percentile < 0.0 || eps_percentile > 100.0) {
    throw std::invalid_argument("eps_percentile must lie in [0, 100]");
  }
  if (merge_width == 0) throw std::invalid_argument("merge_width must be >= 1");
  for (const auto* blocks : {&sequence_blocks, &matrix_blocks}) {
    for (const auto& b : *blocks) {
      if (b.filters == 0 || b.kernel == 0 || b.pool == 0) {
        throw std::invalid_argument("conv blocks need filters, kernel and pool >= 1");
      }
    }
    if (pooled_extent(length, *blocks) == 0) {
      throw std::invalid_argument("pooling reduces the length-" + std::to_string(length) + " input to nothing");
    }
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (folds < 2) throw std::invalid_argument("folds must be >= 2");
}

json TsRpConfig::to_json() const {
  return {{"length", length},
          {"rp_mode", meterguard::to_string(rp_mode)},
          {"eps_percentile", eps_percentile},
          {"sequence_blocks", blocks_json(sequence_blocks)},
          {"matrix_blocks", blocks_json(matrix_blocks)},
          {"merge_width", merge_width},
          {"merge", meterguard::to_string(merge)},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"folds", folds}};
}

TsRpConfig TsRpConfig::from_json(const json& j) {
  TsRpConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "length") c.length = v.get<std::size_t>();
    else if (key == "rp_mode") c.rp_mode = parse_rp_mode(v.get<std::string>());
    else if (key == "eps_percentile") c.eps_percentile = v.get<double>();
    else if (key == "sequence_blocks") c.sequence_blocks = blocks_from(v);
    else if (key == "matrix_blocks") c.matrix_blocks = blocks_from(v);
    else if (key == "merge_width") c.merge_width = v.get<std::size_t>();
    else if (key == "merge") c.merge = parse_merge_mode(v.get<std::string>());
    else if (key == "epochs") c.epochs = v.get<int>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "weight_decay") c.weight_decay = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "folds") c.folds = v.get<int>();
    else throw std::invalid_argument("unknown classifier key '" + key + "'");
  }
  c.validate();
  return c;
}

std::vector<double> prepare_series(std::span<const double> raw, std::size_t length) {
  if (raw.empty()) throw std::invalid_argument("cannot build a classifier sample from an empty series");
  if (length == 0) throw std::invalid_argument("sample length must be >= 1");
  const std::size_t keep = std::min(raw.size(), length);
  const auto tail = raw.subspan(raw.size() - keep);
  const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(keep);
  double ss = 0.0;
  for (double v : tail) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(keep));
  std::vector<double> out(length, 0.0);
  if (sd > 1e-12) {
    for (std::size_t i = 0; i < keep; ++i) out[length - keep + i] = (tail[i] - mean) / sd;
  }
  return out;
}

SubmeterSample make_sample(const std::string& area_id, const std::string& meter_id,
                           std::span<const double> raw, int label, const TsRpConfig& config) {
  SubmeterSample s;
  s.area_id = area_id;
  s.meter_id = meter_id;
  s.series = prepare_series(raw, config.length);
  s.rp = recurrence_plot(s.series, config.rp_mode, config.eps_percentile);
  s.label = label;
  return s;
}

std::vector<SubmeterSample> prepare_samples(const UsageDataset& dataset,
                                            const std::map<std::string, MeterLabel>* labels,
                                            const TsRpConfig& config) {
  std::vector<SubmeterSample> out;
  for (const auto& [meter, series] : dataset.submeters) {
    std::vector<double> raw;
    raw.reserve(series.size());
    for (const auto& [date, usage] : series) raw.push_back(usage);
    if (raw.empty()) {
      throw std::invalid_argument("submeter '" + meter + "' of area '" + dataset.area_id + "' has no readings");
    }
    int label = -1;
    if (labels) {
      const auto it = labels->find(meter);
      if (it != labels->end()) label = static_cast<int>(it->second);
    }
    out.push_back(make_sample(dataset.area_id, meter, raw, label, config));
  }
  return out;
}

std::vector<SubmeterSample> prepare_samples(std::span<const LabeledArea> areas, const TsRpConfig& config) {
  std::vector<SubmeterSample> out;
  for (const auto& a : areas) {
    auto part = prepare_samples(a.dataset, &a.labels, config);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

// --- model -----------------------------------------------------------------

TsRpModel::TsRpModel(const TsRpConfig& config, InputMode mode)
    : config_(config), mode_(mode), mutex_(std::make_unique<std::mutex>()) {
  config_.validate();
  const std::size_t d = config_.merge_width;
  if (mode_ != InputMode::matrix_only) {
    seq_ = std::make_unique<nn::Sequential>("seq");
    std::size_t cin = 1;
    for (const auto& b : config_.sequence_blocks) {
      seq_->emplace<nn::Conv1d>(cin, b.filters, b.kernel, 1, nn::Padding::same);
      seq_->emplace<nn::Relu>();
      seq_->emplace<nn::MaxPool1d>(b.pool);
      cin = b.filters;
    }
    seq_->emplace<nn::Flatten>();
    seq_->emplace<nn::Dense>(pooled_extent(config_.length, config_.sequence_blocks) * cin, d);
    seq_->emplace<nn::Relu>();
  }
  if (mode_ != InputMode::sequence_only) {
    mat_ = std::make_unique<nn::Sequential>("rp");
    std::size_t cin = 1;
    for (const auto& b : config_.matrix_blocks) {
      mat_->emplace<nn::Conv2d>(cin, b.filters, b.kernel, 1, nn::Padding::same);
      mat_->emplace<nn::Relu>();
      mat_->emplace<nn::MaxPool2d>(b.pool);
      cin = b.filters;
    }
    const std::size_t side = pooled_extent(config_.length, config_.matrix_blocks);
    mat_->emplace<nn::Flatten>();
    mat_->emplace<nn::Dense>(side * side * cin, d);
    mat_->emplace<nn::Relu>();
  }
  head_ = std::make_unique<nn::Sequential>("head");
  const bool concat = mode_ == InputMode::dual && config_.merge == MergeMode::concat;
  head_->emplace<nn::Dense>(concat ? 2 * d : d, 1);
}

nn::Tensor TsRpModel::forward(const nn::Tensor& seq, const nn::Tensor& rp) {
  const std::size_t d = config_.merge_width;
  nn::Tensor a, b;
  if (seq_) a = seq_->forward(seq);
  if (mat_) b = mat_->forward(rp);
  nn::Tensor merged;
  if (seq_ && mat_) {
    if (a.dim(0) != b.dim(0)) throw std::invalid_argument("branch batch sizes differ");
    batch_ = a.dim(0);
    if (config_.merge == MergeMode::add) {
      merged = a;
      merged.as_matrix() += b.as_matrix();
    } else {
      merged = nn::Tensor({batch_, 2 * d});
      auto m = merged.matrix(batch_, 2 * d);
      m.leftCols(static_cast<Eigen::Index>(d)) = a.matrix(batch_, d);
      m.rightCols(static_cast<Eigen::Index>(d)) = b.matrix(batch_, d);
    }
  } else {
    merged = seq_ ? a : b;
    batch_ = merged.dim(0);
  }
  return head_->forward(merged);
}

void TsRpModel::backward(const nn::Tensor& grad_logits) {
  const std::size_t d = config_.merge_width;
  const nn::Tensor g = head_->backward(grad_logits);
  if (seq_ && mat_ && config_.merge == MergeMode::concat) {
    nn::Tensor ga({batch_, d}), gb({batch_, d});
    const auto gm = g.matrix(batch_, 2 * d);
    ga.matrix(batch_, d) = gm.leftCols(static_cast<Eigen::Index>(d));
    gb.matrix(batch_, d) = gm.rightCols(static_cast<Eigen::Index>(d));
    seq_->backward(ga);
    mat_->backward(gb);
    return;
  }
  if (seq_) seq_->backward(g);
  if (mat_) mat_->backward(g);
}

std::vector<nn::Parameter*> TsRpModel::parameters() {
  std::vector<nn::Parameter*> out;
  for (nn::Sequential* s : {seq_.get(), mat_.get(), head_.get()}) {
    if (!s) continue;
    for (auto* p : s->parameters()) out.push_back(p);
  }
  return out;
}

void TsRpModel::initialize(std::uint64_t seed) {
  // Separate streams keep each branch's initial weights independent of the ablation mode.
  if (seq_) {
    std::mt19937_64 rng = derive_rng(seed, 0, 31);
    seq_->initialize(rng);
  }
  if (mat_) {
    std::mt19937_64 rng = derive_rng(seed, 1, 31);
    mat_->initialize(rng);
  }
  std::mt19937_64 rng = derive_rng(seed, 2, 31);
  head_->initialize(rng);
}

json TsRpModel::describe() const {
  return {{"model", "ts_rp"},
          {"mode", to_string(mode_)},
          {"merge", to_string(config_.merge)},
          {"length", config_.length},
          {"sequence_branch", seq_ ? seq_->describe() : json(nullptr)},
          {"matrix_branch", mat_ ? mat_->describe() : json(nullptr)},
          {"head", head_->describe()}};
}

nn::Tensor sequence_batch(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx) {
  if (idx.empty()) return nn::Tensor({0, 0, 1});
  const std::size_t t = samples[idx[0]].series.size();
  nn::Tensor x({idx.size(), t, 1});
  double* dst = x.data();
  for (std::size_t i : idx) {
    const auto& s = samples[i].series;
    if (s.size() != t) throw std::invalid_argument("samples disagree in length");
    dst = std::copy(s.begin(), s.end(), dst);
  }
  return x;
}

nn::Tensor matrix_batch(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx) {
  if (idx.empty()) return nn::Tensor({0, 0, 0, 1});
  const std::size_t t = samples[idx[0]].rp.n;
  nn::Tensor x({idx.size(), t, t, 1});
  double* dst = x.data();
  for (std::size_t i : idx) {
    const auto& rp = samples[i].rp;
    if (rp.n != t) throw std::invalid_argument("recurrence plots disagree in size");
    dst = std::copy(rp.values.begin(), rp.values.end(), dst);
  }
  return x;
}

std::vector<double> TsRpModel::predict(std::span<const SubmeterSample> samples) const {
  std::vector<double> out;
  out.reserve(samples.size());
  constexpr std::size_t kChunk = 32;
  std::lock_guard lock(*mutex_);
  auto* self = const_cast<TsRpModel*>(this);
  for (std::size_t i = 0; i < samples.size(); i += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, samples.size() - i));
    std::iota(idx.begin(), idx.end(), i);
    for (std::size_t k : idx) {
      if (samples[k].series.size() != config_.length) {
        throw std::invalid_argument("sample '" + samples[k].meter_id + "' has length " +
                                    std::to_string(samples[k].series.size()) + ", model expects " +
                                    std::to_string(config_.length));
      }
    }
    const nn::Tensor seq = seq_ ? sequence_batch(samples, idx) : nn::Tensor();
    const nn::Tensor rp = mat_ ? matrix_batch(samples, idx) : nn::Tensor();
    const nn::Tensor logits = self->forward(seq, rp);
    for (double z : logits.values()) out.push_back(nn::sigmoid(z));
  }
  return out;
}

json TsRpModel::to_checkpoint() const {
  auto* self = const_cast<TsRpModel*>(this);
  const json training = {{"config", config_.to_json()}, {"mode", to_string(mode_)}, {"loss_curve", loss_curve}};
  return nn::make_checkpoint(describe(), self->parameters(), config_.seed, training);
}

TsRpModel TsRpModel::from_checkpoint(const json& checkpoint) {
  if (!checkpoint.contains("training") || !checkpoint.at("training").contains("config")) {
    throw nn::CheckpointError("classifier checkpoint lacks its training config");
  }
  const json& training = checkpoint.at("training");
  TsRpModel model(TsRpConfig::from_json(training.at("config")),
                  parse_input_mode(training.at("mode").get<std::string>()));
  nn::load_checkpoint(checkpoint, model.describe(), model.parameters());
  model.loss_curve = training.value("loss_curve", std::vector<double>{});
  return model;
}

TsRpModel train_classifier(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx,
                           const TsRpConfig& config, InputMode mode) {
  if (idx.empty()) throw std::invalid_argument("classifier training needs samples");
  for (std::size_t i : idx) {
    if (samples[i].label != 0 && samples[i].label != 1) {
      throw std::invalid_argument("training sample '" + samples[i].meter_id + "' has no label");
    }
  }
  TsRpModel model(config, mode);
  model.initialize(config.seed);
  nn::OptimizerConfig oc;
  oc.kind = nn::OptimizerKind::adam;
  oc.learning_rate = config.learning_rate;
  oc.weight_decay = config.weight_decay;
  nn::Optimizer opt(oc);
  const auto params = model.parameters();
  std::mt19937_64 rng = derive_rng(config.seed, 3, 31);
  std::vector<std::size_t> order(idx.begin(), idx.end());
  const bool use_seq = mode != InputMode::matrix_only;
  const bool use_mat = mode != InputMode::sequence_only;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(i, std::min(config.batch_size, order.size() - i));
      std::vector<double> y;
      for (std::size_t k : batch) y.push_back(samples[k].label);
      nn::zero_grads(params);
      const nn::Tensor logits = model.forward(use_seq ? sequence_batch(samples, batch) : nn::Tensor(),
                                              use_mat ? matrix_batch(samples, batch) : nn::Tensor());
      const nn::LossResult loss = nn::bce_with_logits(logits, y);
      if (!std::isfinite(loss.value)) {
        throw std::runtime_error("non-finite classifier loss at epoch " + std::to_string(epoch + 1));
      }
      model.backward(loss.grad);
      opt.step(params);
      sum += loss.value * static_cast<double>(batch.size());
    }
    model.loss_curve.push_back(sum / static_cast<double>(order.size()));
  }
  nn::zero_grads(params);
  return model;
}

CvResult train_cv(std::span<const SubmeterSample> samples, const TsRpConfig& config, InputMode mode, int jobs) {
  config.validate();
  std::vector<int> labels;
  for (const auto& s : samples) {
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("cross-validation needs labeled samples");
    labels.push_back(s.label);
  }
  CvResult r;
  r.fold = eval::stratified_kfold(labels, config.folds, config.seed);
  r.oof_scores.assign(samples.size(), 0.0);
  r.fold_roc_auc.assign(static_cast<std::size_t>(config.folds), 0.0);
  r.fold_pr_auc.assign(static_cast<std::size_t>(config.folds), 0.0);

  auto run_fold = [&](int f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < samples.size(); ++i) (r.fold[i] == f ? test : train).push_back(i);
    TsRpConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(f);
    const TsRpModel model = train_classifier(samples, train, c, mode);
    std::vector<SubmeterSample> held;
    for (std::size_t i : test) held.push_back(samples[i]);
    const auto scores = model.predict(held);
    std::vector<int> y;
    for (std::size_t k = 0; k < test.size(); ++k) {
      r.oof_scores[test[k]] = scores[k];
      y.push_back(samples[test[k]].label);
    }
    r.fold_roc_auc[static_cast<std::size_t>(f)] = eval::roc_auc(scores, y);
    r.fold_pr_auc[static_cast<std::size_t>(f)] = eval::pr_auc(scores, y);
  };

  const int workers = std::clamp(jobs, 1, config.folds);
  if (workers == 1) {
    for (int f = 0; f < config.folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.folds));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int f = w; f < config.folds; f += workers) {
          try {
            run_fold(f);
          } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  r.roc = eval::mean_std(r.fold_roc_auc);
  r.pr = eval::mean_std(r.fold_pr_auc);
  return r;
}

std::string classification_csv(std::span<const SubmeterSample> samples, std::span<const double> scores,
                               double decision_threshold) {
  if (samples.size() != scores.size()) throw std::invalid_argument("samples and scores differ in length");
  std::ostringstream out;
  out << "area_id,meter_id,score,label_pred,label_true\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << samples[i].area_id << ',' << samples[i].meter_id << ',' << format_double(scores[i]) << ','
        << (scores[i] > decision_threshold ? 1 : 0) << ',';
    if (samples[i].label >= 0) out << samples[i].label;
    out << '\n';
  }
  return out.str();
}

}  // namespace meterguard
