#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "meterguard/baselines/bayesian_ridge.hpp"
#include "meterguard/baselines/elastic_net.hpp"
#include "meterguard/baselines/flat_samples.hpp"
#include "meterguard/baselines/gbr.hpp"
#include "meterguard/baselines/target_rate.hpp"
#include "meterguard/cli/artifacts.hpp"
#include "meterguard/cli/commands.hpp"
#include "meterguard/detector.hpp"
#include "meterguard/eval/metrics.hpp"
#include "meterguard/lstm_predictor.hpp"
#include "meterguard/rp_classifier.hpp"
#include "meterguard/usage_csv.hpp"

namespace meterguard::cli {

using nlohmann::json;

RunLayout RunLayout::under(const fs::path& data_dir, const fs::path& out_dir) {
  return {data_dir,
          out_dir,
          out_dir / "clean",
          out_dir / "predictor",
          out_dir / "detect",
          out_dir / "baselines",
          out_dir / "classify",
          out_dir / "report"};
}

namespace {

std::string usage_csv_text(const UsageDataset& ds) {
  std::ostringstream out;
  write_usage_csv(out, records_from_dataset(ds));
  return out.str();
}

std::vector<double> errors_of(std::span<const FeatureVector> features) {
  std::vector<double> e;
  e.reserve(features.size());
  for (const auto& f : features) e.push_back(f.error);
  return e;
}

std::optional<Date> date_or_null(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Date::parse(j.get<std::string>());
}

json date_json(const std::optional<Date>& d) { return d ? json(d->iso()) : json(nullptr); }

/// Cleaned area as stored by clean_areas.
struct CleanArea {
  std::string area_id;
  UsageDataset observed;
  std::optional<UsageDataset> reference;
  std::optional<AreaLabels> labels;
  std::optional<Date> malfunction_start;
};

// The injection day index counts from the first raw date, which is the
// earliest of the kept and removed days.
std::optional<Date> start_from_labels(const AreaLabels& labels, const UsageDataset& cleaned,
                                      const fs::path& removed_file) {
  if (labels.spec.start_day.empty()) return std::nullopt;
  Date first = cleaned.first_date();
  if (fs::exists(removed_file)) {
    for (const auto& group : read_json(removed_file)) {
      for (const auto& d : group.at("removed_dates")) first = std::min(first, Date::parse(d.get<std::string>()));
    }
  }
  int s = labels.spec.start_day.begin()->second;
  for (const auto& [_, day] : labels.spec.start_day) s = std::min(s, day);
  return first + s;
}

std::vector<CleanArea> load_clean(const fs::path& dir) {
  std::vector<CleanArea> out;
  for (auto& a : load_areas(area_csvs(dir))) {
    CleanArea c{a.area_id, std::move(a.observed), std::move(a.reference), std::move(a.labels), std::nullopt};
    if (c.labels) c.malfunction_start = start_from_labels(*c.labels, c.observed, removed_path(dir, c.area_id));
    out.push_back(std::move(c));
  }
  if (out.empty()) throw DataError("no cleaned area CSVs found in '" + dir.string() + "'");
  return out;
}

/// Training source and windows of one area, reconstructed identically by
/// every stage that needs them.
struct TrainingPlan {
  std::string source;  // "reference" or "history"
  std::vector<FeatureVector> source_features;
  std::vector<WindowSample> train;
  std::size_t detect_from = 0;  // first target index in the observed features
};

TrainingPlan plan_training(const RunConfig& cfg, const CleanArea& area, std::span<const FeatureVector> observed) {
  const auto& pc = cfg.predictor;
  const std::size_t W = pc.model.window;
  TrainingPlan plan;
  const bool use_reference = pc.training == TrainingSource::reference ||
                             (pc.training == TrainingSource::automatic && area.reference.has_value());
  if (use_reference) {
    if (!area.reference) throw DataError("area '" + area.area_id + "' has no reference series for training");
    plan.source = "reference";
    plan.source_features = build_features(*area.reference);
    const auto windows = make_windows(plan.source_features, errors_of(plan.source_features), W);
    if (windows.size() <= pc.n_test) throw DataError("area '" + area.area_id + "' has too few windows for n_test");
    plan.train = split_train_test(windows, pc.n_test).train;
    plan.detect_from = W;
    return plan;
  }
  plan.source = "history";
  plan.source_features.assign(observed.begin(), observed.end());
  const auto windows = make_windows(plan.source_features, errors_of(plan.source_features), W);
  if (pc.train_until) {
    for (const auto& w : windows) {
      if (plan.source_features[w.target_index].date < *pc.train_until) plan.train.push_back(w);
    }
  } else {
    if (windows.size() <= pc.n_test) throw DataError("area '" + area.area_id + "' has too few windows for n_test");
    plan.train = split_train_test(windows, pc.n_test).train;
  }
  if (plan.train.empty()) throw DataError("area '" + area.area_id + "' has no training windows");
  plan.detect_from = plan.train.back().target_index + 1;
  if (plan.detect_from >= observed.size()) throw DataError("area '" + area.area_id + "' has no days left to monitor");
  return plan;
}

std::string predictions_csv(const PredictionSeries& ps) {
  std::ostringstream out;
  out << "date,observed_E,predicted_E\n";
  for (std::size_t i = 0; i < ps.dates.size(); ++i) {
    out << ps.dates[i].iso() << ',' << format_double(ps.observed[i]) << ',' << format_double(ps.predicted[i]) << '\n';
  }
  return out.str();
}

double standardized_mse(const TrainedPredictor& model, std::span<const FeatureVector> features, std::size_t n_test,
                        const FeatureScaler* scaler) {
  const std::size_t first = features.size() - std::min(n_test, features.size() - model.config().window);
  const auto ps = predict_series(model, features, first, scaler);
  double s = 0.0;
  for (std::size_t i = 0; i < ps.observed_z.size(); ++i) s += std::pow(ps.observed_z[i] - ps.predicted_z[i], 2);
  return ps.observed_z.empty() ? 0.0 : s / static_cast<double>(ps.observed_z.size());
}

/// A trained predictor with the scaler to use for one area.
struct LoadedPredictor {
  std::shared_ptr<const TrainedPredictor> model;
  FeatureScaler scaler;
  json entry;
};

std::map<std::string, LoadedPredictor> load_predictors(const fs::path& dir) {
  const fs::path report = dir / "training_report.json";
  if (!fs::exists(report)) {
    throw std::runtime_error("predictor checkpoint index '" + report.string() + "' not found; run train-predictor first");
  }
  std::map<std::string, std::shared_ptr<const TrainedPredictor>> cache;
  std::map<std::string, LoadedPredictor> out;
  const json doc = read_json(report);
  for (const auto& e : doc.at("areas")) {
    const std::string file = e.at("checkpoint").get<std::string>();
    auto& m = cache[file];
    if (!m) m = std::make_shared<const TrainedPredictor>(TrainedPredictor::from_checkpoint(read_json(dir / file)));
    out[e.at("area_id").get<std::string>()] = {m, FeatureScaler::from_json(e.at("scaler")), e};
  }
  return out;
}

const LoadedPredictor& predictor_for(const std::map<std::string, LoadedPredictor>& predictors, const std::string& id) {
  const auto it = predictors.find(id);
  if (it == predictors.end()) throw std::runtime_error("no trained predictor for area '" + id + "'");
  return it->second;
}

std::size_t index_of_date(std::span<const FeatureVector> features, Date d) {
  const auto it = std::lower_bound(features.begin(), features.end(), d,
                                   [](const FeatureVector& f, Date x) { return f.date < x; });
  return static_cast<std::size_t>(it - features.begin());
}

}  // namespace

json generate_corpus(const CorpusConfig& config, const fs::path& dir) {
  const auto corpus = make_labeled_corpus(config);
  json areas = json::array();
  std::size_t inaccurate = 0, meters = 0;
  for (const auto& a : corpus) {
    const std::string& id = a.dataset.area_id;
    write_text(dir / (id + ".csv"), usage_csv_text(a.dataset));
    write_text(reference_path(dir, id), usage_csv_text(a.clean_dataset));
    write_json(labels_path(dir, id), labels_json(a));
    meters += a.labels.size();
    inaccurate += a.spec.start_day.size();
    areas.push_back({{"area_id", id},
                     {"submeters", a.dataset.n_submeters()},
                     {"days", a.dataset.master.size()},
                     {"inaccurate", a.spec.targets()},
                     {"malfunction_start", date_json(a.malfunction_start())}});
  }
  json summary = {{"areas", corpus.size()},
                  {"submeters", meters},
                  {"inaccurate_submeters", inaccurate},
                  {"malfunctioning_areas",
                   std::count_if(corpus.begin(), corpus.end(), [](const auto& a) { return a.has_malfunction(); })},
                  {"per_area", areas}};
  write_json(dir / "corpus.json", summary);
  return summary;
}

void clean_areas(const std::vector<fs::path>& csvs, const fs::path& out) {
  const auto areas = load_areas(csvs);
  if (areas.empty()) throw DataError("no area CSVs to clean");
  for (const auto& a : areas) {
    const CleaningResult r = drop_invalid_days(a.observed);
    write_text(out / (a.area_id + ".csv"), usage_csv_text(r.dataset));
    write_json(removed_path(out, a.area_id), removed_days_json(r.removed));
    if (a.reference) write_text(reference_path(out, a.area_id), usage_csv_text(drop_invalid_days(*a.reference).dataset));
    if (a.labels) {
      for (const auto& csv : csvs) {
        const fs::path lp = labels_path(csv.parent_path(), a.area_id);
        if (fs::exists(lp)) {
          write_text(labels_path(out, a.area_id), read_text(lp));
          break;
        }
      }
    }
    std::cout << a.area_id << ": kept " << r.dataset.master.size() << " days, removed " << r.removed.size() << '\n';
  }
}

void train_predictors(const RunConfig& cfg, const fs::path& clean_dir, const fs::path& out, int jobs) {
  const auto areas = load_clean(clean_dir);
  const auto& pc = cfg.predictor;
  std::vector<std::vector<FeatureVector>> observed(areas.size());
  std::vector<TrainingPlan> plans(areas.size());
  for (std::size_t k = 0; k < areas.size(); ++k) {
    observed[k] = build_features(areas[k].observed);
    plans[k] = plan_training(cfg, areas[k], observed[k]);
  }

  std::vector<json> entries(areas.size());
  auto finish_area = [&](std::size_t k, const TrainedPredictor& model, const FeatureScaler& scaler,
                         const std::string& checkpoint) {
    const auto& a = areas[k];
    const auto ps = predict_series(model, observed[k], plans[k].detect_from, &scaler);
    write_text(out / (a.area_id + ".predictions.csv"), predictions_csv(ps));
    json curve = json::array();
    for (const auto& h : model.history) curve.push_back({{"epoch", h.epoch}, {"train_mse", h.train_mse}, {"val_mse", h.val_mse}});
    entries[k] = {{"area_id", a.area_id},
                  {"checkpoint", checkpoint},
                  {"source", plans[k].source},
                  {"train_windows", plans[k].train.size()},
                  {"detect_from", observed[k][plans[k].detect_from].date.iso()},
                  {"scaler", scaler.to_json()},
                  {"best_epoch", model.best_epoch},
                  {"final_train_mse", model.final_train_mse},
                  {"best_val_mse", model.best_val_mse},
                  {"test_mse", standardized_mse(model, plans[k].source_features, pc.n_test, &scaler)},
                  {"loss_curve", curve}};
  };

  if (pc.pool_areas) {
    std::vector<AreaSeries> series;
    for (const auto& p : plans) series.push_back({p.source_features, p.train});
    std::vector<FeatureScaler> scalers;
    const TrainedPredictor model = train_predictor_pooled(series, pc.model, &scalers);
    write_json(out / "pooled.checkpoint.json", model.to_checkpoint());
    parallel_for(areas.size(), jobs, [&](std::size_t k) { finish_area(k, model, scalers[k], "pooled.checkpoint.json"); });
  } else {
    std::mutex io;
    parallel_for(areas.size(), jobs, [&](std::size_t k) {
      const TrainedPredictor model = train_predictor(plans[k].source_features, plans[k].train, pc.model);
      const std::string file = areas[k].area_id + ".checkpoint.json";
      write_json(out / file, model.to_checkpoint());
      finish_area(k, model, model.scaler, file);
      std::lock_guard lock(io);
      std::cout << areas[k].area_id << ": trained on " << plans[k].source << " (" << plans[k].train.size()
                << " windows, best epoch " << model.best_epoch << ")\n";
    });
  }

  json sweep = json::array();
  if (!pc.sweep_windows.empty()) {
    const auto rows = window_sweep(plans.front().source_features, pc.sweep_windows, pc.n_test, pc.model, pc.sweep_repeats);
    for (const auto& r : rows) {
      sweep.push_back({{"window", r.window}, {"mse_mean", r.mse_mean}, {"mse_std", r.mse_std}, {"runs", r.runs}});
    }
  }
  write_json(out / "training_report.json",
             {{"config", pc.model.to_json()}, {"pooled", pc.pool_areas}, {"areas", entries}, {"window_sweep", sweep}});
}

json detect_areas(const RunConfig& cfg, const fs::path& clean_dir, const fs::path& predictor_dir, const fs::path& out,
                  int jobs) {
  const auto areas = load_clean(clean_dir);
  const auto predictors = load_predictors(predictor_dir);
  const auto& params = cfg.detector.params;
  std::vector<json> summary(areas.size());
  parallel_for(areas.size(), jobs, [&](std::size_t k) {
    const auto& a = areas[k];
    const auto& p = predictor_for(predictors, a.area_id);
    const auto features = build_features(a.observed);
    const std::size_t first = std::max<std::size_t>(
        p.model->config().window, index_of_date(features, Date::parse(p.entry.at("detect_from").get<std::string>())));
    if (first >= features.size()) throw DataError("area '" + a.area_id + "' has no days to monitor");
    const auto ps = predict_series(*p.model, features, first, &p.scaler);
    const bool z = cfg.detector.units == DetectorUnits::standardized;
    const auto& obs = z ? ps.observed_z : ps.observed;
    const auto& pred = z ? ps.predicted_z : ps.predicted;
    DetectionResult r = sliding_window_detect(dpe(obs, pred), ps.dates, params);
    attach_lag(r, a.malfunction_start);
    write_json(out / (a.area_id + ".detection.json"), detection_json(a.area_id, r, params));
    write_text(out / (a.area_id + ".trace.csv"), detection_trace_csv(ps.dates, obs, pred, params.threshold));
    summary[k] = {{"area_id", a.area_id},
                  {"flagged", r.flagged},
                  {"predicted_start", date_json(r.predicted_start)},
                  {"actual_start", date_json(a.malfunction_start)},
                  {"lag", r.lag ? json(*r.lag) : json(nullptr)}};
  });
  const json doc = {{"params", {{"t", params.threshold}, {"L", params.window}}},
                    {"units", to_string(cfg.detector.units)},
                    {"areas", summary}};
  write_json(out / "detections.json", doc);
  std::size_t flagged = 0;
  for (const auto& s : summary) {
    flagged += s.at("flagged").get<bool>();
    std::cout << s.at("area_id").get<std::string>() << ": " << (s.at("flagged").get<bool>() ? "FLAGGED" : "ok");
    if (!s.at("predicted_start").is_null()) std::cout << " from " << s.at("predicted_start").get<std::string>();
    if (!s.at("lag").is_null()) std::cout << " (lag " << s.at("lag").get<long>() << " days)";
    std::cout << '\n';
  }
  std::cout << flagged << " of " << summary.size() << " areas flagged\n";
  return doc;
}

void compare_baselines(const RunConfig& cfg, const fs::path& clean_dir, const fs::path& predictor_dir,
                       const fs::path& detect_dir, const fs::path& out, int jobs) {
  const auto areas = load_clean(clean_dir);
  const auto predictors = load_predictors(predictor_dir);
  std::map<std::string, std::optional<Date>> flagged_start;
  if (const fs::path d = detect_dir / "detections.json"; fs::exists(d)) {
    const json doc = read_json(d);
    for (const auto& s : doc.at("areas")) {
      flagged_start[s.at("area_id").get<std::string>()] = date_or_null(s.at("predicted_start"));
    }
  }
  const auto& bc = cfg.baselines;
  const std::vector<std::string> names{"bayesian_ridge", "elastic_net", "gbr", "lstm"};
  std::vector<std::vector<baselines::TargetRateRow>> per_area(areas.size());
  std::vector<json> diagnostics(areas.size());

  parallel_for(areas.size(), jobs, [&](std::size_t k) {
    const auto& a = areas[k];
    std::optional<Date> start = a.malfunction_start;
    if (!start) {
      const auto it = flagged_start.find(a.area_id);
      if (it != flagged_start.end()) start = it->second;
    }
    if (!start) return;
    const auto& p = predictor_for(predictors, a.area_id);
    const auto features = build_features(a.observed);
    const TrainingPlan plan = plan_training(cfg, a, features);
    const std::size_t W = p.model->config().window;
    const std::size_t first = std::max({W, index_of_date(features, *start), plan.detect_from});
    if (first >= features.size()) return;

    const auto train = baselines::flatten_windows(plan.source_features, plan.train, p.scaler);
    std::vector<WindowSample> horizon;
    for (std::size_t t = first; t < features.size(); ++t) horizon.push_back({t - W, W, t, features[t].error});
    const auto test = baselines::flatten_windows(features, horizon, p.scaler);

    const auto br = baselines::fit_bayesian_ridge(train.X, train.y, bc.bayesian_ridge);
    const auto en = baselines::fit_elastic_net(train.X, train.y, bc.elastic_net);
    const auto gb = baselines::fit_gbr(train.X, train.y, bc.gbr);
    auto to_kwh = [&](const Eigen::VectorXd& z) {
      std::vector<double> v(static_cast<std::size_t>(z.size()));
      for (Eigen::Index i = 0; i < z.size(); ++i) v[static_cast<std::size_t>(i)] = p.scaler.error.invert(z(i));
      return v;
    };
    const auto ps = predict_series(*p.model, features, first, &p.scaler);
    const std::vector<baselines::NamedPredictions> preds{
        {names[0], to_kwh(br.predict(test.X))},
        {names[1], to_kwh(en.predict(test.X))},
        {names[2], to_kwh(gb.predict(test.X))},
        {names[3], ps.predicted}};
    per_area[k] = baselines::compare_on_detection(preds, ps.observed, bc.thresholds);

    std::ostringstream csv;
    csv << "date,observed_E";
    for (const auto& n : names) csv << ',' << n;
    csv << '\n';
    for (std::size_t i = 0; i < ps.dates.size(); ++i) {
      csv << ps.dates[i].iso() << ',' << format_double(ps.observed[i]);
      for (const auto& m : preds) csv << ',' << format_double(m.predicted[i]);
      csv << '\n';
    }
    write_text(out / (a.area_id + ".horizon.csv"), csv.str());
    diagnostics[k] = {{"area_id", a.area_id},
                      {"horizon_start", ps.dates.front().iso()},
                      {"days", ps.dates.size()},
                      {"bayesian_ridge", br.diagnostics()},
                      {"elastic_net", en.diagnostics()},
                      {"gbr", gb.diagnostics()}};
  });

  // Pooled over areas: counts add, the rate is recomputed from the totals.
  std::vector<baselines::TargetRateRow> total;
  for (const auto& rows : per_area) {
    if (total.empty()) {
      total = rows;
      continue;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      total[i].days_outside += rows[i].days_outside;
      total[i].days_total += rows[i].days_total;
    }
  }
  json rows = json::array();
  for (auto& r : total) {
    r.target_rate_pct = r.days_total ? 100.0 * static_cast<double>(r.days_outside) / static_cast<double>(r.days_total) : 0.0;
    rows.push_back({{"threshold", r.threshold},
                    {"model", r.model},
                    {"days_outside", r.days_outside},
                    {"days_total", r.days_total},
                    {"target_rate_pct", r.target_rate_pct}});
  }
  json diag = json::array();
  for (auto& d : diagnostics) {
    if (!d.is_null()) diag.push_back(std::move(d));
  }
  write_text(out / "target_rate.csv", baselines::target_rate_csv(total));
  write_json(out / "target_rate.json", {{"rows", rows}, {"areas", diag}});
  std::cout << "target rate over " << diag.size() << " malfunction horizon(s)\n" << baselines::target_rate_csv(total);
}

namespace {

json cv_json(InputMode mode, const CvResult& r, std::span<const SubmeterSample> samples,
             std::span<const std::size_t> idx) {
  json oof = json::array();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = samples[idx[i]];
    oof.push_back({{"area_id", s.area_id}, {"meter_id", s.meter_id}, {"fold", r.fold[i]}, {"score", r.oof_scores[i]},
                   {"label", s.label}});
  }
  return {{"mode", to_string(mode)},
          {"fold_roc_auc", r.fold_roc_auc},
          {"fold_pr_auc", r.fold_pr_auc},
          {"roc_auc", eval::format_mean_std(r.roc)},
          {"roc_auc_mean", r.roc.mean},
          {"roc_auc_std", r.roc.std},
          {"pr_auc", eval::format_mean_std(r.pr)},
          {"pr_auc_mean", r.pr.mean},
          {"pr_auc_std", r.pr.std},
          {"oof", oof}};
}

std::vector<SubmeterSample> subset(std::span<const SubmeterSample> samples, std::span<const std::size_t> idx) {
  std::vector<SubmeterSample> out;
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

}  // namespace

ClassifierOutcome run_classifier(const RunConfig& cfg, const std::vector<fs::path>& raw_csvs,
                                 const ClassifierOptions& opt, const fs::path& out) {
  const auto& cc = cfg.classifier;
  const auto areas = load_areas(raw_csvs);
  std::set<std::string> selected;
  if (opt.detections && !opt.classify_all) {
    if (!fs::exists(*opt.detections)) throw std::runtime_error("detections file '" + opt.detections->string() + "' not found");
    const json doc = read_json(*opt.detections);
    for (const auto& s : doc.at("areas")) {
      if (s.at("flagged").get<bool>()) selected.insert(s.at("area_id").get<std::string>());
    }
  } else {
    for (const auto& a : areas) selected.insert(a.area_id);
  }

  ClassifierOutcome outcome;
  std::vector<SubmeterSample> samples;
  for (const auto& a : areas) {
    if (!selected.count(a.area_id)) continue;
    ++outcome.areas;
    // raw observed readings: cleaning would drop the drifting days
    auto s = prepare_samples(a.observed, a.labels ? &a.labels->labels : nullptr, cc.model);
    samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  outcome.samples = samples.size();

  if (samples.empty()) {
    outcome.skipped = true;
    outcome.reason = "no area flagged by the detector";
    write_json(out / "skipped.json", {{"skipped", true}, {"reason", outcome.reason}});
    std::cout << "classifier stage skipped: " << outcome.reason << '\n';
  } else {
    std::vector<double> scores(samples.size(), 0.0);
    if (opt.checkpoint) {
      const TsRpModel model = TsRpModel::from_checkpoint(read_json(*opt.checkpoint));
      scores = model.predict(samples);
    } else {
      std::vector<std::size_t> labeled;
      std::vector<int> labels;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].label >= 0) {
          labeled.push_back(i);
          labels.push_back(samples[i].label);
        }
      }
      const auto pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
      const auto neg = static_cast<int>(labels.size()) - pos;
      if (pos < cc.model.folds || neg < cc.model.folds) {
        throw std::runtime_error("classifier training needs at least " + std::to_string(cc.model.folds) +
                                 " labeled submeters per class (found " + std::to_string(pos) + " inaccurate, " +
                                 std::to_string(neg) + " accurate); pass a classifier checkpoint instead");
      }
      const auto train_set = subset(samples, labeled);
      std::vector<InputMode> modes{cc.input_mode};
      for (auto m : cc.ablations) {
        if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
      }
      json reports = json::array();
      for (const auto mode : modes) {
        const CvResult r = train_cv(train_set, cc.model, mode, opt.jobs);
        std::vector<std::size_t> all(train_set.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        reports.push_back(cv_json(mode, r, train_set, all));
        if (mode == cc.input_mode) {
          for (std::size_t i = 0; i < labeled.size(); ++i) scores[labeled[i]] = r.oof_scores[i];
        }
        std::cout << "cv " << to_string(mode) << ": ROC AUC " << eval::format_mean_std(r.roc) << ", PR AUC "
                  << eval::format_mean_std(r.pr) << '\n';
      }
      std::vector<std::size_t> all(train_set.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const TsRpModel model = train_classifier(train_set, all, cc.model, cc.input_mode);
      write_json(out / "model.checkpoint.json", model.to_checkpoint());
      std::vector<std::size_t> unlabeled;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].label < 0) unlabeled.push_back(i);
      }
      if (!unlabeled.empty()) {
        const auto s = model.predict(subset(samples, unlabeled));
        for (std::size_t i = 0; i < unlabeled.size(); ++i) scores[unlabeled[i]] = s[i];
      }
      write_json(out / "fold_report.json",
                 {{"folds", cc.model.folds}, {"input_mode", to_string(cc.input_mode)}, {"architectures", reports}});
    }
    write_text(out / "classification.csv", classification_csv(samples, scores, cc.decision_threshold));
  }

  if (!cc.proportion_sweep.empty()) {
    json rows = json::array();
    for (double p : cc.proportion_sweep) {
      CorpusConfig corpus_cfg = cfg.simgen;
      corpus_cfg.fraction_inaccurate = 1.0 - p;
      std::vector<LabeledArea> corpus;
      for (auto& a : make_labeled_corpus(corpus_cfg)) {
        if (a.has_malfunction()) corpus.push_back(std::move(a));
      }
      const auto sweep_samples = prepare_samples(corpus, cc.model);
      const CvResult r = train_cv(sweep_samples, cc.model, cc.input_mode, opt.jobs);
      rows.push_back({{"accurate_proportion", p},
                      {"mode", to_string(cc.input_mode)},
                      {"fold_roc_auc", r.fold_roc_auc},
                      {"fold_pr_auc", r.fold_pr_auc},
                      {"roc_auc_mean", r.roc.mean},
                      {"pr_auc_mean", r.pr.mean}});
      std::cout << "proportion " << p << ": ROC AUC " << eval::format_mean_std(r.roc) << '\n';
    }
    write_json(out / "proportion_sweep.json", {{"rows", rows}});
  }
  return outcome;
}

eval::ReportBundle report_from_run(const RunLayout& L) {
  eval::ReportInputs in;
  if (const fs::path p = L.predictor / "training_report.json"; fs::exists(p)) {
    const json doc = read_json(p);
    for (const auto& r : doc.at("window_sweep")) {
      in.window_sweep.push_back({r.at("window").get<std::size_t>(), r.at("mse_mean").get<double>(),
                                 r.at("mse_std").get<double>(), r.at("runs").get<int>()});
    }
  }
  if (const fs::path p = L.detect / "detections.json"; fs::exists(p)) {
    const json doc = read_json(p);
    const double t = doc.at("params").at("t").get<double>();
    for (const auto& s : doc.at("areas")) {
      eval::DetectionTrace d;
      d.area_id = s.at("area_id").get<std::string>();
      d.threshold = t;
      d.flagged = s.at("flagged").get<bool>();
      d.predicted_start = date_or_null(s.at("predicted_start"));
      d.actual_start = date_or_null(s.at("actual_start"));
      if (!s.at("lag").is_null()) d.lag = s.at("lag").get<long>();
      for (const auto& row : read_csv_rows(L.detect / (d.area_id + ".trace.csv"), "date,observed_E,predicted_E,DPE,exceeds")) {
        d.dates.push_back(Date::parse(row.at(0)));
        d.observed.push_back(std::stod(row.at(1)));
        d.predicted.push_back(std::stod(row.at(2)));
      }
      in.detections.push_back(std::move(d));
    }
  }
  if (const fs::path p = L.classify / "fold_report.json"; fs::exists(p)) {
    const json doc = read_json(p);
    for (const auto& a : doc.at("architectures")) {
      eval::ArchitectureResult r;
      r.name = a.at("mode").get<std::string>();
      r.fold_roc_auc = a.at("fold_roc_auc").get<std::vector<double>>();
      r.fold_pr_auc = a.at("fold_pr_auc").get<std::vector<double>>();
      for (const auto& o : a.at("oof")) {
        r.fold.push_back(o.at("fold").get<int>());
        r.scores.push_back(o.at("score").get<double>());
        r.labels.push_back(o.at("label").get<int>());
      }
      in.architectures.push_back(std::move(r));
    }
  }
  if (const fs::path p = L.baselines / "target_rate.json"; fs::exists(p)) {
    const json doc = read_json(p);
    for (const auto& r : doc.at("rows")) {
      in.target_rates.push_back({r.at("threshold").get<double>(), r.at("model").get<std::string>(),
                                 r.at("days_outside").get<std::size_t>(), r.at("days_total").get<std::size_t>(),
                                 r.at("target_rate_pct").get<double>()});
    }
  }
  if (const fs::path p = L.classify / "proportion_sweep.json"; fs::exists(p)) {
    const json doc = read_json(p);
    for (const auto& r : doc.at("rows")) {
      in.proportion_sweep.push_back({r.at("accurate_proportion").get<double>(),
                                     r.at("fold_roc_auc").get<std::vector<double>>(),
                                     r.at("fold_pr_auc").get<std::vector<double>>()});
    }
  }
  return eval::experiment_report(in);
}

std::map<std::string, std::string> evaluate_scores(const fs::path& scores_csv, const std::vector<fs::path>& labels,
                                                   OutputFormat format, double decision_threshold) {
  std::vector<std::string> missing;
  if (!fs::exists(scores_csv)) missing.push_back(scores_csv.string());
  for (const auto& l : labels) {
    if (!fs::exists(l)) missing.push_back(l.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing input file(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw std::runtime_error(msg);
  }

  std::map<std::pair<std::string, std::string>, int> truth;
  for (const auto& l : labels) {
    std::vector<fs::path> files;
    if (fs::is_directory(l)) {
      for (const auto& e : fs::directory_iterator(l)) {
        const std::string n = e.path().filename().string();
        if (n.size() > 12 && n.compare(n.size() - 12, 12, ".labels.json") == 0) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw std::runtime_error("no labels files in '" + l.string() + "'");
    } else {
      files.push_back(l);
    }
    for (const auto& f : files) {
      const AreaLabels al = parse_labels_json(read_json(f));
      for (const auto& [m, lab] : al.labels) truth[{al.area_id, m}] = static_cast<int>(lab);
    }
  }

  std::istringstream in(read_text(scores_csv));
  std::string header;
  std::getline(in, header);
  if (header.rfind("area_id,meter_id,score", 0) != 0) {
    throw DataError("'" + scores_csv.string() + "' must start with columns area_id,meter_id,score");
  }
  const bool has_truth_column = header == "area_id,meter_id,score,label_pred,label_true";
  std::vector<double> scores;
  std::vector<int> y;
  std::vector<std::string> unlabeled;
  for (const auto& row : read_csv_rows(scores_csv, header)) {
    const std::pair<std::string, std::string> key{row.at(0), row.at(1)};
    std::optional<int> label;
    if (!labels.empty()) {
      if (const auto it = truth.find(key); it != truth.end()) label = it->second;
    } else if (has_truth_column && row.size() > 4 && !row[4].empty()) {
      label = std::stoi(row[4]);
    }
    if (!label) {
      unlabeled.push_back(key.first + "/" + key.second);
      continue;
    }
    scores.push_back(std::stod(row.at(2)));
    y.push_back(*label);
  }
  if (!unlabeled.empty()) {
    throw std::runtime_error("missing labels for " + std::to_string(unlabeled.size()) + " scored submeter(s) in '" +
                             scores_csv.string() + "' (first: " + unlabeled.front() +
                             "); pass the labels JSON with --labels");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool p = scores[i] >= decision_threshold;
    if (p && y[i]) ++tp;
    else if (p) ++fp;
    else if (y[i]) ++fn;
    else ++tn;
  }
  const double roc = eval::roc_auc(scores, y);
  const double pr = eval::pr_auc(scores, y);
  const auto roc_pts = eval::roc_curve(scores, y);
  const auto pr_pts = eval::pr_curve(scores, y);

  std::map<std::string, std::string> files;
  if (format == OutputFormat::json) {
    auto pts = [](const std::vector<eval::CurvePoint>& v, const char* x, const char* yname) {
      json a = json::array();
      for (const auto& p : v) {
        a.push_back({{"threshold", std::isinf(p.threshold) ? json("inf") : json(p.threshold)}, {x, p.x}, {yname, p.y}});
      }
      return a;
    };
    const json doc = {{"n", y.size()},
                      {"positives", tp + fn},
                      {"roc_auc", roc},
                      {"pr_auc", pr},
                      {"decision_threshold", decision_threshold},
                      {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}},
                      {"roc_points", pts(roc_pts, "fpr", "tpr")},
                      {"pr_points", pts(pr_pts, "recall", "precision")}};
    files["evaluation.json"] = doc.dump(2) + "\n";
  } else {
    std::ostringstream m;
    m << "metric,value\n"
      << "n," << y.size() << "\npositives," << tp + fn << "\nroc_auc," << format_double(roc) << "\npr_auc,"
      << format_double(pr) << "\ndecision_threshold," << format_double(decision_threshold) << "\ntp," << tp << "\nfp,"
      << fp << "\ntn," << tn << "\nfn," << fn << '\n';
    files["evaluation.csv"] = m.str();
    std::ostringstream r, p;
    r << "threshold,fpr,tpr\n";
    for (const auto& q : roc_pts) {
      r << (std::isinf(q.threshold) ? "inf" : format_double(q.threshold)) << ',' << format_double(q.x) << ','
        << format_double(q.y) << '\n';
    }
    p << "threshold,recall,precision\n";
    for (const auto& q : pr_pts) p << format_double(q.threshold) << ',' << format_double(q.x) << ',' << format_double(q.y) << '\n';
    files["roc_points.csv"] = r.str();
    files["pr_points.csv"] = p.str();
  }
  return files;
}

}  // namespace meterguard::cli
