#include "meterguard/cli/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace meterguard::cli {

using nlohmann::json;

const char* to_string(TrainingSource s) {
  switch (s) {
    case TrainingSource::automatic: return "auto";
    case TrainingSource::reference: return "reference";
    case TrainingSource::history: return "history";
  }
  return "auto";
}

TrainingSource parse_training_source(const std::string& s) {
  if (s == "auto") return TrainingSource::automatic;
  if (s == "reference") return TrainingSource::reference;
  if (s == "history") return TrainingSource::history;
  throw UsageError("unknown predictor training source '" + s + "' (auto, reference, history)");
}

const char* to_string(DetectorUnits u) { return u == DetectorUnits::kwh ? "kwh" : "standardized"; }

DetectorUnits parse_detector_units(const std::string& s) {
  if (s == "standardized") return DetectorUnits::standardized;
  if (s == "kwh") return DetectorUnits::kwh;
  throw UsageError("unknown detector units '" + s + "' (standardized, kwh)");
}

namespace {

using Handlers = std::map<std::string, std::function<void(const json&)>>;

// Dispatches every key of `j` to its handler; unknown keys and type errors
// surface as UsageError naming the offending path.
void read_object(const json& j, const std::string& where, const Handlers& handlers) {
  if (!j.is_object()) throw UsageError("config '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers.find(key);
    const std::string path = where.empty() ? key : where + "." + key;
    if (it == handlers.end()) throw UsageError("unknown config key '" + path + "'");
    try {
      it->second(value);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError("invalid config value at '" + path + "': " + e.what());
    }
  }
}

json area_json(const AreaConfig& a) {
  return {{"start_date", a.start_date.iso()},
          {"base_usage_mean", a.base_usage_mean},
          {"base_usage_spread", a.base_usage_spread},
          {"seasonal_amplitude", a.seasonal_amplitude},
          {"seasonal_peak_day", a.seasonal_peak_day},
          {"weekday_effect", a.weekday_effect},
          {"noise_sigma", a.noise_sigma},
          {"master_overhead_mean", a.master_overhead_mean},
          {"overhead_noise_sigma", a.overhead_noise_sigma}};
}

void read_area(const json& j, AreaConfig& a) {
  read_object(j, "simgen.area",
              {{"start_date", [&](const json& v) { a.start_date = Date::parse(v.get<std::string>()); }},
               {"base_usage_mean", [&](const json& v) { a.base_usage_mean = v.get<double>(); }},
               {"base_usage_spread", [&](const json& v) { a.base_usage_spread = v.get<double>(); }},
               {"seasonal_amplitude", [&](const json& v) { a.seasonal_amplitude = v.get<double>(); }},
               {"seasonal_peak_day", [&](const json& v) { a.seasonal_peak_day = v.get<int>(); }},
               {"weekday_effect", [&](const json& v) { a.weekday_effect = v.get<std::array<double, 7>>(); }},
               {"noise_sigma", [&](const json& v) { a.noise_sigma = v.get<double>(); }},
               {"master_overhead_mean", [&](const json& v) { a.master_overhead_mean = v.get<double>(); }},
               {"overhead_noise_sigma", [&](const json& v) { a.overhead_noise_sigma = v.get<double>(); }}});
}

json simgen_json(const CorpusConfig& c) {
  return {{"areas", c.n_areas},
          {"submeters", c.area.n_submeters},
          {"days", c.area.n_days},
          {"fraction", c.fraction_inaccurate},
          {"clean_areas", c.n_clean_areas},
          {"alpha", c.alpha},
          {"noise_sigma_n", c.noise_sigma_n ? json(*c.noise_sigma_n) : json(nullptr)},
          {"start_window", {c.start_window_lo, c.start_window_hi}},
          {"seed", c.seed},
          {"area", area_json(c.area)}};
}

void read_simgen(const json& j, CorpusConfig& c, bool& seed_set) {
  read_object(j, "simgen",
              {{"areas", [&](const json& v) { c.n_areas = v.get<int>(); }},
               {"submeters", [&](const json& v) { c.area.n_submeters = v.get<int>(); }},
               {"days", [&](const json& v) { c.area.n_days = v.get<int>(); }},
               {"fraction", [&](const json& v) { c.fraction_inaccurate = v.get<double>(); }},
               {"clean_areas", [&](const json& v) { c.n_clean_areas = v.get<int>(); }},
               {"alpha", [&](const json& v) { c.alpha = v.get<double>(); }},
               {"noise_sigma_n",
                [&](const json& v) {
                  c.noise_sigma_n = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
                }},
               {"start_window",
                [&](const json& v) {
                  const auto w = v.get<std::array<double, 2>>();
                  c.start_window_lo = w[0];
                  c.start_window_hi = w[1];
                }},
               {"seed",
                [&](const json& v) {
                  c.seed = v.get<std::uint64_t>();
                  seed_set = true;
                }},
               {"area", [&](const json& v) { read_area(v, c.area); }}});
}

json predictor_json(const PredictorSection& p) {
  json j = p.model.to_json();
  j["n_test"] = p.n_test;
  j["training"] = to_string(p.training);
  j["train_until"] = p.train_until ? json(p.train_until->iso()) : json(nullptr);
  j["pool_areas"] = p.pool_areas;
  j["sweep_windows"] = p.sweep_windows;
  j["sweep_repeats"] = p.sweep_repeats;
  return j;
}

void read_predictor(const json& j, PredictorSection& p, bool& seed_set) {
  json model = json::object();
  read_object(j, "predictor",
              {{"n_test", [&](const json& v) { p.n_test = v.get<std::size_t>(); }},
               {"training", [&](const json& v) { p.training = parse_training_source(v.get<std::string>()); }},
               {"train_until",
                [&](const json& v) {
                  p.train_until = v.is_null() ? std::nullopt : std::optional<Date>(Date::parse(v.get<std::string>()));
                }},
               {"pool_areas", [&](const json& v) { p.pool_areas = v.get<bool>(); }},
               {"sweep_windows", [&](const json& v) { p.sweep_windows = v.get<std::vector<std::size_t>>(); }},
               {"sweep_repeats", [&](const json& v) { p.sweep_repeats = v.get<int>(); }},
               {"window", [&](const json& v) { model["window"] = v; }},
               {"hidden", [&](const json& v) { model["hidden"] = v; }},
               {"epochs", [&](const json& v) { model["epochs"] = v; }},
               {"learning_rate", [&](const json& v) { model["learning_rate"] = v; }},
               {"batch_size", [&](const json& v) { model["batch_size"] = v; }},
               {"validation_fraction", [&](const json& v) { model["validation_fraction"] = v; }},
               {"patience", [&](const json& v) { model["patience"] = v; }},
               {"clip_norm", [&](const json& v) { model["clip_norm"] = v; }},
               {"weight_decay", [&](const json& v) { model["weight_decay"] = v; }},
               {"cell", [&](const json& v) { model["cell"] = v; }},
               {"seed",
                [&](const json& v) {
                  model["seed"] = v;
                  seed_set = true;
                }}});
  try {
    p.model = PredictorConfig::from_json(model);
  } catch (const std::exception& e) {
    throw UsageError(std::string("invalid predictor config: ") + e.what());
  }
}

json classifier_json(const ClassifierSection& c) {
  json j = c.model.to_json();
  j["input_mode"] = to_string(c.input_mode);
  json ab = json::array();
  for (auto m : c.ablations) ab.push_back(to_string(m));
  j["ablations"] = ab;
  j["proportion_sweep"] = c.proportion_sweep;
  j["decision_threshold"] = c.decision_threshold;
  return j;
}

void read_classifier(const json& j, ClassifierSection& c, bool& seed_set) {
  json model = json::object();
  Handlers h{{"input_mode", [&](const json& v) { c.input_mode = parse_input_mode(v.get<std::string>()); }},
             {"ablations",
              [&](const json& v) {
                c.ablations.clear();
                for (const auto& m : v) c.ablations.push_back(parse_input_mode(m.get<std::string>()));
              }},
             {"proportion_sweep", [&](const json& v) { c.proportion_sweep = v.get<std::vector<double>>(); }},
             {"decision_threshold", [&](const json& v) { c.decision_threshold = v.get<double>(); }},
             {"seed",
              [&](const json& v) {
                model["seed"] = v;
                seed_set = true;
              }}};
  for (const char* key : {"length", "rp_mode", "eps_percentile", "sequence_blocks", "matrix_blocks", "merge_width",
                          "merge", "epochs", "learning_rate", "batch_size", "weight_decay", "folds"}) {
    h[key] = [&model, key](const json& v) { model[key] = v; };
  }
  read_object(j, "classifier", h);
  try {
    c.model = TsRpConfig::from_json(model);
  } catch (const std::exception& e) {
    throw UsageError(std::string("invalid classifier config: ") + e.what());
  }
}

json baselines_json(const BaselinesSection& b) {
  const auto& br = b.bayesian_ridge;
  return {{"enabled", b.enabled},
          {"thresholds", b.thresholds},
          {"bayesian_ridge",
           {{"max_iter", br.max_iter},
            {"tol", br.tol},
            {"alpha_1", br.alpha_1},
            {"alpha_2", br.alpha_2},
            {"lambda_1", br.lambda_1},
            {"lambda_2", br.lambda_2},
            {"fixed_lambda", br.fixed_lambda ? json(*br.fixed_lambda) : json(nullptr)}}},
          {"elastic_net",
           {{"l1", b.elastic_net.l1},
            {"l2", b.elastic_net.l2},
            {"tol", b.elastic_net.tol},
            {"max_sweeps", b.elastic_net.max_sweeps}}},
          {"gbr",
           {{"n_trees", b.gbr.n_trees},
            {"max_depth", b.gbr.max_depth},
            {"learning_rate", b.gbr.learning_rate},
            {"min_samples_leaf", b.gbr.min_samples_leaf}}}};
}

void read_baselines(const json& j, BaselinesSection& b) {
  auto& br = b.bayesian_ridge;
  auto& en = b.elastic_net;
  auto& g = b.gbr;
  read_object(
      j, "baselines",
      {{"enabled", [&](const json& v) { b.enabled = v.get<bool>(); }},
       {"thresholds", [&](const json& v) { b.thresholds = v.get<std::vector<double>>(); }},
       {"bayesian_ridge",
        [&](const json& v) {
          read_object(v, "baselines.bayesian_ridge",
                      {{"max_iter", [&](const json& x) { br.max_iter = x.get<int>(); }},
                       {"tol", [&](const json& x) { br.tol = x.get<double>(); }},
                       {"alpha_1", [&](const json& x) { br.alpha_1 = x.get<double>(); }},
                       {"alpha_2", [&](const json& x) { br.alpha_2 = x.get<double>(); }},
                       {"lambda_1", [&](const json& x) { br.lambda_1 = x.get<double>(); }},
                       {"lambda_2", [&](const json& x) { br.lambda_2 = x.get<double>(); }},
                       {"fixed_lambda", [&](const json& x) {
                          br.fixed_lambda = x.is_null() ? std::nullopt : std::optional<double>(x.get<double>());
                        }}});
        }},
       {"elastic_net",
        [&](const json& v) {
          read_object(v, "baselines.elastic_net",
                      {{"l1", [&](const json& x) { en.l1 = x.get<double>(); }},
                       {"l2", [&](const json& x) { en.l2 = x.get<double>(); }},
                       {"tol", [&](const json& x) { en.tol = x.get<double>(); }},
                       {"max_sweeps", [&](const json& x) { en.max_sweeps = x.get<int>(); }}});
        }},
       {"gbr", [&](const json& v) {
          read_object(v, "baselines.gbr",
                      {{"n_trees", [&](const json& x) { g.n_trees = x.get<int>(); }},
                       {"max_depth", [&](const json& x) { g.max_depth = x.get<int>(); }},
                       {"learning_rate", [&](const json& x) { g.learning_rate = x.get<double>(); }},
                       {"min_samples_leaf", [&](const json& x) { g.min_samples_leaf = x.get<int>(); }}});
        }}});
}

}  // namespace

void RunConfig::validate() const {
  try {
    simgen.validate();
    detector.params.validate();
    classifier.model.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (predictor.n_test == 0) throw UsageError("predictor.n_test must be >= 1");
  if (predictor.sweep_repeats < 1) throw UsageError("predictor.sweep_repeats must be >= 1");
  for (auto w : predictor.sweep_windows) {
    if (w == 0) throw UsageError("predictor.sweep_windows entries must be >= 1");
  }
  for (double p : classifier.proportion_sweep) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("classifier.proportion_sweep entries must lie in (0, 1)");
  }
  if (!(classifier.decision_threshold >= 0.0 && classifier.decision_threshold <= 1.0)) {
    throw UsageError("classifier.decision_threshold must lie in [0, 1]");
  }
  for (double t : baselines.thresholds) {
    if (!(t > 0.0)) throw UsageError("baselines.thresholds entries must be > 0");
  }
  const auto& en = baselines.elastic_net;
  if (en.l1 < 0.0 || en.l2 < 0.0) throw UsageError("baselines.elastic_net penalties must be >= 0");
  const auto& g = baselines.gbr;
  if (g.n_trees < 0 || g.max_depth < 1 || g.min_samples_leaf < 1 || g.learning_rate < 0.0) {
    throw UsageError("baselines.gbr needs n_trees >= 0, max_depth >= 1, min_samples_leaf >= 1, learning_rate >= 0");
  }
  if (paths.data_dir.empty() || paths.out_dir.empty()) throw UsageError("paths entries must be non-empty");
}

json RunConfig::to_json() const {
  return {{"seed", seed ? json(*seed) : json(nullptr)},
          {"paths", {{"data_dir", paths.data_dir}, {"out_dir", paths.out_dir}}},
          {"simgen", simgen_json(simgen)},
          {"predictor", predictor_json(predictor)},
          {"detector",
           {{"t", detector.params.threshold}, {"L", detector.params.window}, {"units", to_string(detector.units)}}},
          {"classifier", classifier_json(classifier)},
          {"baselines", baselines_json(baselines)}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  bool simgen_seed = false, predictor_seed = false, classifier_seed = false;
  read_object(
      j, "",
      {{"seed", [&](const json& v) { c.seed = v.is_null() ? std::nullopt : std::optional(v.get<std::uint64_t>()); }},
       {"paths",
        [&](const json& v) {
          read_object(v, "paths",
                      {{"data_dir", [&](const json& x) { c.paths.data_dir = x.get<std::string>(); }},
                       {"out_dir", [&](const json& x) { c.paths.out_dir = x.get<std::string>(); }}});
        }},
       {"simgen", [&](const json& v) { read_simgen(v, c.simgen, simgen_seed); }},
       {"predictor", [&](const json& v) { read_predictor(v, c.predictor, predictor_seed); }},
       {"detector",
        [&](const json& v) {
          read_object(v, "detector",
                      {{"t", [&](const json& x) { c.detector.params.threshold = x.get<double>(); }},
                       {"L", [&](const json& x) { c.detector.params.window = x.get<std::size_t>(); }},
                       {"units", [&](const json& x) { c.detector.units = parse_detector_units(x.get<std::string>()); }}});
        }},
       {"classifier", [&](const json& v) { read_classifier(v, c.classifier, classifier_seed); }},
       {"baselines", [&](const json& v) { read_baselines(v, c.baselines); }}});
  if (c.seed) {
    if (!simgen_seed) c.simgen.seed = *c.seed;
    if (!predictor_seed) c.predictor.model.seed = *c.seed;
    if (!classifier_seed) c.classifier.model.seed = *c.seed;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

void apply_global_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.simgen.seed = seed;
  config.predictor.model.seed = seed;
  config.classifier.model.seed = seed;
}

}  // namespace meterguard::cli
