#include "meterguard/lstm_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "meterguard/nn/checkpoint.hpp"
#include "meterguard/nn/loss.hpp"
#include "meterguard/nn/optimizer.hpp"

namespace meterguard {

using nlohmann::json;

Standardizer Standardizer::fit(std::span<const double> values) {
  Standardizer s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / n);
  s.scale = sd > 1e-12 ? sd : 1.0;
  return s;
}

FeatureScaler FeatureScaler::fit(std::span<const FeatureVector> features) {
  std::vector<double> e, m, c, n;
  for (const auto& f : features) {
    e.push_back(f.error);
    m.push_back(f.master);
    c.push_back(static_cast<double>(f.com_date));
    n.push_back(f.number);
  }
  return {Standardizer::fit(e), Standardizer::fit(m), Standardizer::fit(c), Standardizer::fit(n)};
}

std::array<double, kFeatureDim> FeatureScaler::encode(const FeatureVector& f) const {
  std::array<double, kFeatureDim> out{};
  std::size_t k = 0;
  out[k++] = error.apply(f.error);
  out[k++] = master.apply(f.master);
  out[k++] = com_date.apply(static_cast<double>(f.com_date));
  for (auto v : f.weekday_onehot) out[k++] = v;
  for (auto v : f.month_onehot) out[k++] = v;
  for (auto v : f.year_onehot) out[k++] = v;
  out[k++] = number.apply(f.number);
  return out;
}

namespace {

json standardizer_json(const Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }
Standardizer standardizer_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("scale").get<double>()};
}

}  // namespace

json FeatureScaler::to_json() const {
  return {{"error", standardizer_json(error)},
          {"master", standardizer_json(master)},
          {"com_date", standardizer_json(com_date)},
          {"number", standardizer_json(number)}};
}

FeatureScaler FeatureScaler::from_json(const json& j) {
  return {standardizer_from(j.at("error")), standardizer_from(j.at("master")),
          standardizer_from(j.at("com_date")), standardizer_from(j.at("number"))};
}

std::vector<FeatureVector> build_features(const UsageDataset& dataset) {
  const auto dates = dataset.dates();
  if (dates.empty()) throw DataError("area '" + dataset.area_id + "' has no dates");
  const Date base = dates.front();
  std::vector<FeatureVector> out;
  out.reserve(dates.size());
  for (const Date d : dates) {
    FeatureVector f;
    f.date = d;
    f.error = residual_error(dataset, d);
    f.master = dataset.master.at(d);
    const CalendarFeatures cal = encode_date(d, base, base.year());
    f.com_date = cal.com_date;
    f.weekday_onehot = cal.weekday_onehot;
    f.month_onehot = cal.month_onehot;
    f.year_onehot = cal.year_onehot;
    f.number = static_cast<double>(dataset.n_submeters());
    out.push_back(f);
  }
  return out;
}

std::vector<WindowSample> make_windows(std::span<const FeatureVector> features,
                                       std::span<const double> targets, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window size must be >= 1");
  if (targets.size() != features.size()) {
    throw std::invalid_argument("targets and features differ in length");
  }
  if (features.size() < window + 1) {
    throw std::invalid_argument("need at least " + std::to_string(window + 1) + " days for window " +
                                std::to_string(window) + ", got " + std::to_string(features.size()));
  }
  std::vector<WindowSample> out;
  out.reserve(features.size() - window);
  for (std::size_t s = 0; s + window < features.size(); ++s) {
    out.push_back({s, window, s + window, targets[s + window]});
  }
  return out;
}

TrainTestSplit split_train_test(std::span<const WindowSample> samples, std::size_t n_test) {
  if (n_test >= samples.size()) {
    throw std::invalid_argument("n_test " + std::to_string(n_test) + " must be below sample count " +
                                std::to_string(samples.size()));
  }
  const std::size_t cut = samples.size() - n_test;
  return {{samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(cut)},
          {samples.begin() + static_cast<std::ptrdiff_t>(cut), samples.end()}};
}

json PredictorConfig::to_json() const {
  return {{"window", window},
          {"hidden", hidden},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"validation_fraction", validation_fraction},
          {"patience", patience},
          {"clip_norm", clip_norm},
          {"weight_decay", weight_decay},
          {"cell", nn::to_string(cell)},
          {"seed", seed}};
}

PredictorConfig PredictorConfig::from_json(const json& j) {
  PredictorConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "window") c.window = value.get<std::size_t>();
    else if (key == "hidden") c.hidden = value.get<std::vector<std::size_t>>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "clip_norm") c.clip_norm = value.get<double>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "cell") c.cell = nn::parse_cell_variant(value.get<std::string>());
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("unknown predictor key '" + key + "'");
  }
  if (c.window == 0) throw std::invalid_argument("predictor window must be >= 1");
  if (c.hidden.empty()) throw std::invalid_argument("predictor needs at least one LSTM layer");
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0) {
    throw std::invalid_argument("validation_fraction must lie in [0, 1)");
  }
  return c;
}

std::unique_ptr<nn::Sequential> build_predictor_network(const PredictorConfig& config) {
  auto net = std::make_unique<nn::Sequential>("predictor");
  std::size_t in = kFeatureDim;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    const bool last = l + 1 == config.hidden.size();
    net->emplace<nn::Lstm>(in, config.hidden[l], !last, config.cell);
    in = config.hidden[l];
  }
  net->emplace<nn::Dense>(in, 1);
  return net;
}

TrainedPredictor::TrainedPredictor(const PredictorConfig& config)
    : config_(config), net_(build_predictor_network(config)), mutex_(std::make_unique<std::mutex>()) {}

nn::Tensor encode_windows(std::span<const FeatureVector> features,
                          std::span<const std::size_t> starts, std::size_t window,
                          const FeatureScaler& scaler) {
  nn::Tensor x({starts.size(), window, kFeatureDim});
  double* dst = x.data();
  for (std::size_t s : starts) {
    if (s + window > features.size()) throw std::out_of_range("window runs past the feature series");
    for (std::size_t t = 0; t < window; ++t) {
      const auto row = scaler.encode(features[s + t]);
      dst = std::copy(row.begin(), row.end(), dst);
    }
  }
  return x;
}

std::vector<double> TrainedPredictor::predict_standardized(std::span<const FeatureVector> features,
                                                           std::span<const std::size_t> starts,
                                                           const FeatureScaler& sc) const {
  std::vector<double> out;
  out.reserve(starts.size());
  constexpr std::size_t kChunk = 256;
  std::lock_guard lock(*mutex_);
  for (std::size_t i = 0; i < starts.size(); i += kChunk) {
    const auto chunk = starts.subspan(i, std::min(kChunk, starts.size() - i));
    const nn::Tensor y = net_->forward(encode_windows(features, chunk, config_.window, sc));
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

namespace {

json architecture_of(const PredictorConfig& c, const nn::Sequential& net) {
  return {{"model", "lstm_predictor"}, {"feature_dim", kFeatureDim}, {"window", c.window},
          {"network", net.describe()}};
}

struct EncodedArea {
  std::vector<double> table;  // [days, kFeatureDim]
  std::vector<WindowSample> windows;
  FeatureScaler scaler;
};

EncodedArea encode_area(std::span<const FeatureVector> features, std::span<const WindowSample> train) {
  if (train.empty()) throw std::invalid_argument("predictor training needs at least one sample");
  std::size_t last_target = 0;
  for (const auto& w : train) last_target = std::max(last_target, w.target_index);
  if (last_target >= features.size()) throw std::out_of_range("training window beyond feature series");
  EncodedArea a;
  a.scaler = FeatureScaler::fit(features.subspan(0, last_target + 1));
  a.table.reserve(features.size() * kFeatureDim);
  for (const auto& f : features) {
    const auto row = a.scaler.encode(f);
    a.table.insert(a.table.end(), row.begin(), row.end());
  }
  a.windows.assign(train.begin(), train.end());
  return a;
}

struct SampleRef {
  std::size_t area;
  std::size_t window;
};

void fill_batch(const std::vector<EncodedArea>& areas, std::span<const SampleRef> refs,
                std::size_t w, nn::Tensor& x, std::vector<double>& y) {
  x = nn::Tensor({refs.size(), w, kFeatureDim});
  y.resize(refs.size());
  double* dst = x.data();
  for (std::size_t b = 0; b < refs.size(); ++b) {
    const EncodedArea& a = areas[refs[b].area];
    const WindowSample& s = a.windows[refs[b].window];
    const double* src = a.table.data() + s.start * kFeatureDim;
    dst = std::copy(src, src + w * kFeatureDim, dst);
    y[b] = a.scaler.error.apply(s.target);
  }
}

double evaluate_mse(nn::Sequential& net, const std::vector<EncodedArea>& areas,
                    std::span<const SampleRef> refs, std::size_t w, std::size_t batch) {
  if (refs.empty()) return 0.0;
  double sum = 0.0;
  nn::Tensor x;
  std::vector<double> y;
  for (std::size_t i = 0; i < refs.size(); i += batch) {
    const auto chunk = refs.subspan(i, std::min(batch, refs.size() - i));
    fill_batch(areas, chunk, w, x, y);
    sum += nn::mse_loss(net.forward(x), y).value * static_cast<double>(chunk.size());
  }
  return sum / static_cast<double>(refs.size());
}

TrainedPredictor fit(std::vector<EncodedArea> areas, const PredictorConfig& config) {
  TrainedPredictor model(config);
  nn::Sequential& net = model.net();
  std::mt19937_64 init_rng(config.seed);
  net.initialize(init_rng);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  // Each area contributes its chronological tail to validation.
  std::vector<SampleRef> fit_refs, val_refs;
  for (std::size_t a = 0; a < areas.size(); ++a) {
    const std::size_t n = areas[a].windows.size();
    std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
    if (n - n_val < 1) n_val = 0;
    for (std::size_t i = 0; i < n; ++i) (i < n - n_val ? fit_refs : val_refs).push_back({a, i});
  }

  nn::OptimizerConfig oc;
  oc.kind = nn::OptimizerKind::adam;
  oc.learning_rate = config.learning_rate;
  oc.clip_norm = config.clip_norm;
  oc.weight_decay = config.weight_decay;
  nn::Optimizer opt(oc);
  const auto params = net.parameters();

  std::vector<nn::Tensor> best(params.size());
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  nn::Tensor x;
  std::vector<double> y;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(fit_refs.begin(), fit_refs.end(), shuffle_rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < fit_refs.size(); i += config.batch_size) {
      const auto chunk = std::span<const SampleRef>(fit_refs).subspan(
          i, std::min(config.batch_size, fit_refs.size() - i));
      fill_batch(areas, chunk, config.window, x, y);
      nn::zero_grads(params);
      const nn::LossResult loss = nn::mse_loss(net.forward(x), y);
      if (!std::isfinite(loss.value)) {
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at sample " + std::to_string(i) +
                                 " (learning rate " + std::to_string(config.learning_rate) + ")");
      }
      net.backward(loss.grad);
      opt.step(params);
      sum += loss.value * static_cast<double>(chunk.size());
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_mse = sum / static_cast<double>(fit_refs.size());
    st.val_mse = val_refs.empty() ? st.train_mse
                                  : evaluate_mse(net, areas, val_refs, config.window, 256);
    model.history.push_back(st);
    if (st.val_mse < best_score) {
      best_score = st.val_mse;
      model.best_epoch = epoch;
      for (std::size_t p = 0; p < params.size(); ++p) best[p] = params[p]->value;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (model.best_epoch > 0) {
    for (std::size_t p = 0; p < params.size(); ++p) params[p]->value = best[p];
  }
  nn::zero_grads(params);
  model.best_val_mse = best_score;
  model.final_train_mse = evaluate_mse(net, areas, fit_refs, config.window, 256);
  model.scaler = areas.front().scaler;
  return model;
}

}  // namespace

json TrainedPredictor::to_checkpoint() const {
  json hist = json::array();
  for (const auto& h : history) hist.push_back({h.epoch, h.train_mse, h.val_mse});
  const json training = {{"config", config_.to_json()},
                         {"scaler", scaler.to_json()},
                         {"best_epoch", best_epoch},
                         {"final_train_mse", final_train_mse},
                         {"best_val_mse", best_val_mse},
                         {"history", hist}};
  return nn::make_checkpoint(architecture_of(config_, *net_), net_->parameters(), config_.seed, training);
}

TrainedPredictor TrainedPredictor::from_checkpoint(const json& checkpoint) {
  if (!checkpoint.contains("training") || !checkpoint.at("training").contains("config")) {
    throw nn::CheckpointError("predictor checkpoint lacks its training config");
  }
  const json& training = checkpoint.at("training");
  TrainedPredictor model(PredictorConfig::from_json(training.at("config")));
  nn::load_checkpoint(checkpoint, architecture_of(model.config_, *model.net_), model.net_->parameters());
  model.scaler = FeatureScaler::from_json(training.at("scaler"));
  model.best_epoch = training.value("best_epoch", 0);
  model.final_train_mse = training.value("final_train_mse", 0.0);
  model.best_val_mse = training.value("best_val_mse", 0.0);
  for (const auto& h : training.value("history", json::array())) {
    model.history.push_back({h.at(0).get<int>(), h.at(1).get<double>(), h.at(2).get<double>()});
  }
  return model;
}

TrainedPredictor train_predictor(std::span<const FeatureVector> features,
                                 std::span<const WindowSample> train, const PredictorConfig& config) {
  std::vector<EncodedArea> areas;
  areas.push_back(encode_area(features, train));
  return fit(std::move(areas), config);
}

TrainedPredictor train_predictor_pooled(std::span<const AreaSeries> series,
                                        const PredictorConfig& config,
                                        std::vector<FeatureScaler>* area_scalers) {
  if (series.empty()) throw std::invalid_argument("pooled training needs at least one area");
  std::vector<EncodedArea> areas;
  for (const auto& s : series) areas.push_back(encode_area(s.features, s.train));
  if (area_scalers) {
    area_scalers->clear();
    for (const auto& a : areas) area_scalers->push_back(a.scaler);
  }
  return fit(std::move(areas), config);
}

PredictionSeries predict_series(const TrainedPredictor& model,
                                std::span<const FeatureVector> features, std::size_t first_target,
                                const FeatureScaler* scaler) {
  const std::size_t w = model.config().window;
  if (first_target < w) {
    throw std::invalid_argument("first predicted day needs " + std::to_string(w) +
                                " days of history, got " + std::to_string(first_target));
  }
  const FeatureScaler& sc = scaler ? *scaler : model.scaler;
  std::vector<std::size_t> starts;
  for (std::size_t t = first_target; t < features.size(); ++t) starts.push_back(t - w);
  const std::vector<double> z = model.predict_standardized(features, starts, sc);
  PredictionSeries out;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const FeatureVector& f = features[starts[k] + w];
    out.dates.push_back(f.date);
    out.observed.push_back(f.error);
    out.predicted.push_back(sc.error.invert(z[k]));
    out.observed_z.push_back(sc.error.apply(f.error));
    out.predicted_z.push_back(z[k]);
  }
  return out;
}

std::vector<WindowSweepRow> window_sweep(std::span<const FeatureVector> features,
                                         std::span<const std::size_t> windows, std::size_t n_test,
                                         const PredictorConfig& config, int repeats) {
  if (repeats < 1) throw std::invalid_argument("window sweep needs at least one repeat");
  std::vector<double> targets;
  for (const auto& f : features) targets.push_back(f.error);
  std::vector<WindowSweepRow> rows;
  for (const std::size_t w : windows) {
    const auto samples = make_windows(features, targets, w);
    const auto split = split_train_test(samples, n_test);
    std::vector<double> mses;
    for (int r = 0; r < repeats; ++r) {
      PredictorConfig c = config;
      c.window = w;
      c.seed = config.seed + static_cast<std::uint64_t>(r);
      const TrainedPredictor model = train_predictor(features, split.train, c);
      std::vector<std::size_t> starts;
      for (const auto& s : split.test) starts.push_back(s.start);
      const auto z = model.predict_standardized(features, starts, model.scaler);
      double se = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double d = z[k] - model.scaler.error.apply(split.test[k].target);
        se += d * d;
      }
      mses.push_back(z.empty() ? 0.0 : se / static_cast<double>(z.size()));
    }
    WindowSweepRow row;
    row.window = w;
    row.runs = repeats;
    row.mse_mean = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(mses.size());
    double ss = 0.0;
    for (double m : mses) ss += (m - row.mse_mean) * (m - row.mse_mean);
    row.mse_std = std::sqrt(ss / static_cast<double>(mses.size()));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace meterguard
