// Acceptance checks, one PASS/FAIL line per criterion. Usage: acceptance [N ...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include <Eigen/QR>
#include <sstream>
#include <string>

#include "meterguard/baselines/bayesian_ridge.hpp"
#include "meterguard/baselines/elastic_net.hpp"
#include "meterguard/baselines/flat_samples.hpp"
#include "meterguard/baselines/gbr.hpp"
#include "meterguard/baselines/target_rate.hpp"
#include "meterguard/cli/artifacts.hpp"
#include "meterguard/cli/commands.hpp"
#include "meterguard/cli/config.hpp"
#include "meterguard/detector.hpp"
#include "meterguard/eval/metrics.hpp"
#include "meterguard/lstm_predictor.hpp"
#include "meterguard/recurrence_plot.hpp"
#include "meterguard/rp_classifier.hpp"
#include "meterguard/simgen.hpp"
#include "support/differentiable.hpp"

#ifndef METERGUARD_FIXTURE_DIR
#define METERGUARD_FIXTURE_DIR "tests/fixtures"
#endif

using namespace meterguard;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream why;
  void require(bool cond, const std::string& msg) {
    if (!cond && ok) why << msg;
    ok = ok && cond;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("meterguard-acceptance-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

cli::RunConfig fixture(const std::string& name, const fs::path& root) {
  auto cfg = cli::load_run_config((fs::path(METERGUARD_FIXTURE_DIR) / name).string());
  cfg.paths.data_dir = (root / "data").string();
  cfg.paths.out_dir = (root / "out").string();
  return cfg;
}

// 1. Finite-difference gradient agreement on every architecture.
Outcome gradients() {
  Check c;
  std::mt19937_64 rng(1);
  double worst = 0.0;
  std::size_t checked = 0, excluded = 0;

  const PredictorConfig pc;
  auto net = build_predictor_network(pc);
  net->initialize(rng);
  testing::SequentialMse lstm(*net, testing::random_tensor({2, pc.window, kFeatureDim}, rng), {0.4, -1.2});
  const auto rl = nn::grad_check(lstm);
  c.require(rl.passed(), "lstm stack: " + std::to_string(rl.failed) + " entries above tolerance");
  worst = std::max(worst, rl.max_relative_error);
  checked += rl.checked;

  const TsRpConfig tc;
  for (auto mode : {InputMode::dual, InputMode::sequence_only, InputMode::matrix_only}) {
    TsRpModel m(tc, mode);
    m.initialize(2);
    testing::TsRpBce f(m, testing::random_tensor({2, tc.length, 1}, rng),
                       testing::random_tensor({2, tc.length, tc.length, 1}, rng), {1.0, 0.0});
    nn::GradCheckOptions o;
    o.max_entries_per_parameter = 48;
    o.seed = 3;
    const auto r = nn::grad_check(f, o);
    c.require(r.passed(), std::string(to_string(mode)) + ": " + std::to_string(r.failed) + " entries above tolerance");
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
    excluded += r.excluded;
  }
  return {c.ok, "max relative error " + fmt(worst) + " over " + std::to_string(checked) + " entries (" +
                    std::to_string(excluded) + " kink entries excluded)" + (c.ok ? "" : "; " + c.why.str())};
}

// 2. Drift injection is exact and never touches the master meter.
Outcome injection() {
  Check c;
  double worst = 0.0;
  CorpusConfig cc;
  cc.n_areas = 5;
  cc.noise_sigma_n = 0.0;
  for (const auto& area : make_labeled_corpus(cc)) {
    c.require(area.dataset.master == area.clean_dataset.master, area.dataset.area_id + ": master modified");
    for (const auto& [meter, s] : area.spec.start_day) {
      const auto& before = area.clean_dataset.submeters.at(meter);
      const auto& after = area.dataset.submeters.at(meter);
      long i = 0;
      for (auto it = before.begin(), jt = after.begin(); it != before.end(); ++it, ++jt, ++i) {
        const double expect = i >= s ? (1.0 + area.spec.alpha * static_cast<double>(i - s)) * it->second : it->second;
        worst = std::max(worst, std::abs(jt->second - expect));
      }
    }
  }
  c.require(worst <= 1e-12, "elementwise deviation " + fmt(worst));
  return {c.ok, "max |new - (1+a(i-s))old| = " + fmt(worst) + ", master bit-identical" + (c.ok ? "" : "; " + c.why.str())};
}

// 3. 770 days, W=40 -> 730 windows -> 703/27.
Outcome windowing() {
  AreaConfig a;
  const auto d = drop_invalid_days(generate_area(a)).dataset;
  const auto f = build_features(d);
  const auto w = make_windows(f, residual_series(d).values, 40);
  const auto s = split_train_test(w, 27);
  const bool ok = f.size() == 770 && w.size() == 730 && s.train.size() == 703 && s.test.size() == 27;
  return {ok, std::to_string(f.size()) + " days -> " + std::to_string(w.size()) + " windows -> " +
                  std::to_string(s.train.size()) + "/" + std::to_string(s.test.size())};
}

// 4. Detection on the fixture corpus through the pipeline stages.
Outcome detection() {
  const auto root = scratch("detection");
  const auto cfg = fixture("detection.json", root);
  const auto L = cli::RunLayout::under(cfg.paths.data_dir, cfg.paths.out_dir);
  cli::generate_corpus(cfg.simgen, L.data);
  cli::clean_areas(cli::area_csvs(L.data), L.clean);
  cli::train_predictors(cfg, L.clean, L.predictor, 1);
  const json doc = cli::detect_areas(cfg, L.clean, L.predictor, L.detect, 1);

  Check c;
  int injected = 0, caught = 0, clean = 0, false_alarms = 0;
  long lo = 1 << 20, hi = -(1 << 20);
  for (const auto& a : doc.at("areas")) {
    const std::string id = a.at("area_id");
    const bool has_start = a.contains("actual_start") && !a.at("actual_start").is_null();
    const bool flagged = a.at("flagged");
    if (has_start) {
      ++injected;
      if (!flagged) {
        c.require(false, id + " not flagged");
        continue;
      }
      const long lag = a.at("lag");
      lo = std::min(lo, lag);
      hi = std::max(hi, lag);
      c.require(lag >= 0 && lag <= 90, id + " lag " + std::to_string(lag));
      caught += lag >= 0 && lag <= 90;
    } else {
      ++clean;
      false_alarms += flagged;
      c.require(!flagged, id + " (clean) flagged");
    }
  }
  c.require(injected > 0 && clean > 0, "fixture lacks injected or clean areas");
  std::string d = std::to_string(caught) + "/" + std::to_string(injected) + " injected areas flagged with lag in [0, 90]";
  if (caught > 0) d += " (lags " + std::to_string(lo) + ".." + std::to_string(hi) + ")";
  d += ", " + std::to_string(false_alarms) + "/" + std::to_string(clean) + " clean areas flagged";
  fs::remove_all(root);
  return {c.ok, d + (c.ok ? "" : "; " + c.why.str())};
}

// 5. Threshold and window monotonicity on random DPE series.
Outcome monotonicity() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(4, 120);
  int violations = 0, flagged = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(len(rng)));
    const double level = 2.0 * u(rng);
    for (auto& v : s) v = level * u(rng) + (u(rng) < 0.1 ? 2.0 : 0.0);
    DetectionParams p;
    p.threshold = 0.05 + 1.5 * u(rng);
    p.window = 1 + static_cast<std::size_t>(u(rng) * std::min<std::size_t>(8, s.size()));
    const auto base = sliding_window_detect(s, p);
    if (!base.flagged) continue;
    ++flagged;
    DetectionParams lower = p;
    lower.threshold = p.threshold * u(rng) + 1e-9;
    DetectionParams shorter = p;
    shorter.window = 1 + static_cast<std::size_t>(u(rng) * static_cast<double>(p.window));
    const auto a = sliding_window_detect(s, lower);
    const auto b = sliding_window_detect(s, shorter);
    if (!a.flagged || *a.start_index > *base.start_index) ++violations;
    if (!b.flagged || *b.start_index > *base.start_index) ++violations;
  }
  return {violations == 0 && flagged > 100,
          std::to_string(violations) + " violations over 1000 series (" + std::to_string(flagged) + " flagged at the base setting)"};
}

// 6. AUC against exhaustive recomputation.
Outcome auc_oracles() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> n(2, 50), levels(1, 12), bit(0, 1);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    do {
      const int len = n(rng), lv = levels(rng);
      std::uniform_int_distribution<int> pick(0, lv);
      s.assign(static_cast<std::size_t>(len), 0.0);
      y.assign(static_cast<std::size_t>(len), 0);
      for (int i = 0; i < len; ++i) {
        s[static_cast<std::size_t>(i)] = pick(rng) / static_cast<double>(lv);
        y[static_cast<std::size_t>(i)] = bit(rng);
      }
    } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);

    double concordant = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          concordant += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    const double roc = concordant / pairs;

    const std::set<double, std::greater<>> thresholds(s.begin(), s.end());
    const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    // Recall steps are taken in integer counts so both sides round identically.
    double ap = 0.0, prev_tp = 0.0;
    for (double t : thresholds) {
      double tp = 0.0, predicted = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= t) {
          predicted += 1.0;
          tp += y[i];
        }
      ap += (tp - prev_tp) / pos * (tp / predicted);
      prev_tp = tp;
    }
    if (eval::roc_auc(s, y) != roc) ++mismatches;
    if (eval::pr_auc(s, y) != ap) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 200 instances (exact equality)"};
}

std::vector<SubmeterSample> classifier_samples(const cli::RunConfig& cfg) {
  return prepare_samples(make_labeled_corpus(cfg.simgen), cfg.classifier.model);
}

// 7. Dual-input AUC level and margin over the sequence-only ablation.
Outcome classifier_headline() {
  const auto cfg = fixture("classifier.json", scratch("classifier"));
  const auto samples = classifier_samples(cfg);
  const auto dual = train_cv(samples, cfg.classifier.model, InputMode::dual, 1);
  const auto seq = train_cv(samples, cfg.classifier.model, InputMode::sequence_only, 1);
  const double margin = dual.roc.mean - seq.roc.mean;
  const bool ok = dual.roc.mean >= 0.75 && margin >= 0.10;
  return {ok, "dual ROC AUC " + eval::format_mean_std(dual.roc, 3) + " (need >= 0.75), sequence-only " +
                  eval::format_mean_std(seq.roc, 3) + ", margin " + fmt(margin, 3) + " (need >= 0.10)"};
}

// 8. AUC across accurate-meter proportions.
Outcome proportion_sweep() {
  auto cfg = fixture("classifier.json", scratch("proportion"));
  Check c;
  std::string d;
  for (double p : {0.5, 0.7, 0.9}) {
    cfg.simgen.fraction_inaccurate = 1.0 - p;
    const auto cv = train_cv(classifier_samples(cfg), cfg.classifier.model, cfg.classifier.input_mode, 1);
    c.require(cv.roc.mean >= 0.70, "proportion " + fmt(p, 2) + " below 0.70");
    d += (d.empty() ? "" : ", ") + fmt(p, 2) + ": " + eval::format_mean_std(cv.roc, 3);
  }
  return {c.ok, "mean ROC AUC by accurate proportion " + d};
}

// 9. Recurrence plot symmetry, diagonal and invariances.
Outcome recurrence() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> grid(-2048, 2048), len(2, 150), shift(-50, 50);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Values on a dyadic grid keep shifted distances exact.
    std::vector<double> s(static_cast<std::size_t>(len(rng))), shifted(s.size()), scaled(s.size());
    const double c = shift(rng), k = scale(rng);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = grid(rng) / 256.0;
      shifted[i] = s[i] + c;
      scaled[i] = k * s[i];
    }
    for (auto mode : {RpMode::binary, RpMode::grayscale}) {
      const auto m = recurrence_plot(s, mode);
      const auto ms = recurrence_plot(shifted, mode);
      for (std::size_t i = 0; i < m.n; ++i) {
        if (mode == RpMode::binary && m.at(i, i) != 1.0) ++bad;
        for (std::size_t j = 0; j < m.n; ++j)
          if (m.at(i, j) != m.at(j, i)) ++bad;
      }
      if (m.values != ms.values) ++bad;
      if (mode == RpMode::grayscale) {
        const auto mk = recurrence_plot(scaled, mode);
        for (std::size_t q = 0; q < m.values.size(); ++q)
          if (std::abs(m.values[q] - mk.values[q]) > 1e-12) ++bad;
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " property violations over 100 series in both modes"};
}

// 10. Baseline optimality and target-rate monotonicity.
Outcome baselines_sanity() {
  Check c;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  double ols_err = 0.0, kkt = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd X(40, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
    Eigen::VectorXd y(40);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = z(rng);
    baselines::ElasticNetConfig none;
    none.l1 = none.l2 = 0.0;
    none.tol = 1e-12;
    const auto en = baselines::fit_elastic_net(X, y, none);
    Eigen::MatrixXd A(40, 5);
    A << Eigen::VectorXd::Ones(40), X;
    const Eigen::VectorXd ols = A.colPivHouseholderQr().solve(y);
    ols_err = std::max({ols_err, (en.coef - ols.tail(4)).cwiseAbs().maxCoeff(), std::abs(en.intercept - ols(0))});

    baselines::ElasticNetConfig pen;
    pen.l1 = 2.0 * (trial % 3);
    pen.l2 = 0.5;
    kkt = std::max(kkt, baselines::kkt_residual(X, y, baselines::fit_elastic_net(X, y, pen)));
  }
  c.require(ols_err <= 1e-6, "OLS deviation " + fmt(ols_err));
  c.require(kkt < 1e-6, "KKT residual " + fmt(kkt));

  CorpusConfig cc;
  cc.n_areas = 1;
  cc.area.n_days = 300;
  const auto area = make_labeled_area(cc, 0);
  const auto d = drop_invalid_days(area.dataset).dataset;
  const auto f = build_features(d);
  const auto w = make_windows(f, residual_series(d).values, 20);
  const auto split = split_train_test(w, w.size() / 3);
  const auto scaler = FeatureScaler::fit(std::span<const FeatureVector>(f).first(split.train.back().target_index + 1));
  const auto train = baselines::flatten_windows(f, split.train, scaler);
  const auto test = baselines::flatten_windows(f, split.test, scaler);
  const auto gbr = baselines::fit_gbr(train.X, train.y);
  bool gbr_mono = true;
  for (std::size_t k = 1; k < gbr.train_mse.size(); ++k) gbr_mono = gbr_mono && gbr.train_mse[k] <= gbr.train_mse[k - 1];
  c.require(gbr_mono, "GBR training MSE increased");

  std::vector<double> observed;
  for (const auto& s : split.test) observed.push_back(s.target);
  auto kwh = [&](const Eigen::VectorXd& zs) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < zs.size(); ++i) out.push_back(scaler.error.invert(zs(i)));
    return out;
  };
  const std::vector<baselines::NamedPredictions> models{
      {"bayesian_ridge", kwh(baselines::fit_bayesian_ridge(train.X, train.y).predict(test.X))},
      {"elastic_net", kwh(baselines::fit_elastic_net(train.X, train.y).predict(test.X))},
      {"gbr", kwh(gbr.predict(test.X))}};
  std::vector<double> thresholds;
  for (int k = 0; k <= 40; ++k) thresholds.push_back(0.05 + 0.25 * k);
  const auto rows = baselines::compare_on_detection(models, observed, thresholds);
  std::map<std::string, double> last;
  bool antitone = true;
  for (const auto& r : rows) {
    if (last.count(r.model)) antitone = antitone && r.target_rate_pct <= last[r.model];
    last[r.model] = r.target_rate_pct;
  }
  c.require(antitone, "target rate increased with the threshold");
  return {c.ok, "OLS deviation " + fmt(ols_err) + ", max KKT residual " + fmt(kkt) + ", GBR MSE nonincreasing over " +
                    std::to_string(gbr.trees.size()) + " stages, target rate antitone over " +
                    std::to_string(thresholds.size()) + " thresholds x 3 models" + (c.ok ? "" : "; " + c.why.str())};
}

// 11. Two identical pipeline runs produce identical artifacts.
Outcome determinism() {
  const auto root = scratch("determinism");
  auto cfg = fixture("determinism.json", root);
  cli::write_json(root / "config.json", cfg.to_json());
  auto run = [&] {
    const std::vector<std::string> gen{"meterguard", "generate", "--config", (root / "config.json").string()};
    const std::vector<std::string> pipe{"meterguard", "pipeline", "--config", (root / "config.json").string(), "--classify-all"};
    if (cli::run_cli(gen) != 0 || cli::run_cli(pipe) != 0) throw std::runtime_error("pipeline run failed");
    std::map<std::string, std::string> files;
    for (const fs::path& dir : {root / "data", root / "out"})
      for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root).string();
        if (e.path().filename() == cli::kManifestName) {
          json m = cli::read_json(e.path());
          m.erase("started_at");
          m.erase("finished_at");
          files[rel] = m.dump();
        } else {
          files[rel] = cli::read_text(e.path());
        }
      }
    return files;
  };
  const auto a = run();
  const auto b = run();
  std::size_t differing = 0;
  for (const auto& [name, text] : a)
    if (!b.count(name) || b.at(name) != text) ++differing;
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  fs::remove_all(root);
  return {differing == 0 && !a.empty(),
          std::to_string(a.size()) + " artifacts compared, " + std::to_string(differing) + " differ (manifest timestamps excluded)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, gradients},   {2, injection},        {3, windowing},  {4, detection},
      {5, monotonicity}, {6, auc_oracles},     {7, classifier_headline},
      {8, proportion_sweep}, {9, recurrence}, {10, baselines_sanity}, {11, determinism}};
  // Wall-clock budgets in seconds; 0 means unbounded.
  const std::map<int, double> budget{{1, 60},  {2, 0},  {3, 5},  {4, 600}, {5, 10}, {6, 10},
                                     {7, 900}, {8, 1800}, {9, 5}, {10, 60}, {11, 0}};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, fn] : criteria) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << k << '\n';
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double cap = budget.at(k);
    if (cap > 0 && secs > cap) {
      o.pass = false;
      o.detail += "; exceeded the " + fmt(cap, 4) + " s budget";
    }
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << " [" << fmt(secs, 3)
              << " s]" << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
