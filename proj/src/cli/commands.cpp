#include "meterguard/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

#include "meterguard/cli/artifacts.hpp"

namespace meterguard::cli {

using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration JSON");
  cmd->add_option("--seed", c.seed, "Global seed (overrides every section seed)");
  cmd->add_option("--jobs", c.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
}

RunConfig base_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) apply_global_seed(cfg, *c.seed);
  return cfg;
}

void finish_config(RunConfig& cfg) { cfg.validate(); }

std::vector<fs::path> inputs_of(const std::vector<std::string>& files, const std::string& dir) {
  if (!files.empty()) {
    std::vector<fs::path> out;
    for (const auto& f : files) {
      if (!fs::exists(f)) throw std::runtime_error("input file '" + f + "' not found");
      out.emplace_back(f);
    }
    return out;
  }
  auto out = area_csvs(dir);
  if (out.empty()) throw std::runtime_error("no area CSVs in '" + dir + "'");
  return out;
}

/// Runs `body` and records a manifest in `out_dir` whatever the outcome.
void with_manifest(const std::string& command, const std::vector<std::string>& args, const RunConfig& cfg,
                   const fs::path& out_dir, std::vector<std::string>& stages, const std::function<void()>& body) {
  RunManifest m;
  m.command = command;
  m.argv = args;
  m.config = cfg.to_json();
  m.started_at = utc_timestamp();
  try {
    body();
  } catch (...) {
    m.finished_at = utc_timestamp();
    m.exit_code = 1;
    m.stages = stages;
    try {
      write_manifest(out_dir, m);
    } catch (...) {
    }
    throw;
  }
  m.finished_at = utc_timestamp();
  m.stages = stages;
  write_manifest(out_dir, m);
}

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what) {}
};

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Submeter malfunction detection and classification toolkit", "meterguard"};
  app.require_subcommand(1);
  std::function<void()> action;

  // generate
  Common gen_c;
  std::optional<int> gen_areas, gen_submeters, gen_days, gen_clean;
  std::optional<double> gen_fraction, gen_alpha;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Synthesize a labeled corpus of residential areas");
  add_common(gen, gen_c);
  gen->add_option("--areas", gen_areas, "Number of areas");
  gen->add_option("--submeters", gen_submeters, "Submeters per area");
  gen->add_option("--days", gen_days, "Days per area");
  gen->add_option("--fraction", gen_fraction, "Fraction of inaccurate submeters in a malfunctioning area");
  gen->add_option("--clean-areas", gen_clean, "Areas generated without malfunction");
  gen->add_option("--alpha", gen_alpha, "Daily drift rate");
  gen->add_option("--out", gen_out, "Output directory (default: paths.data_dir)");
  gen->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(gen_c);
      if (gen_areas) cfg.simgen.n_areas = *gen_areas;
      if (gen_submeters) cfg.simgen.area.n_submeters = *gen_submeters;
      if (gen_days) cfg.simgen.area.n_days = *gen_days;
      if (gen_fraction) cfg.simgen.fraction_inaccurate = *gen_fraction;
      if (gen_clean) cfg.simgen.n_clean_areas = *gen_clean;
      if (gen_alpha) cfg.simgen.alpha = *gen_alpha;
      finish_config(cfg);
      const fs::path out = gen_out.empty() ? fs::path(cfg.paths.data_dir) : fs::path(gen_out);
      std::vector<std::string> stages{"generate"};
      with_manifest("generate", args, cfg, out, stages, [&] {
        const json s = generate_corpus(cfg.simgen, out);
        std::cout << "generated " << s.at("areas") << " areas (" << s.at("malfunctioning_areas")
                  << " with malfunction), " << s.at("submeters") << " submeters, " << s.at("inaccurate_submeters")
                  << " inaccurate, in " << out.string() << '\n';
      });
    };
  });

  // clean
  Common clean_c;
  std::vector<std::string> clean_inputs;
  std::string clean_data, clean_out;
  auto* cln = app.add_subcommand("clean", "Drop incomplete and submeter-overflow days");
  add_common(cln, clean_c);
  cln->add_option("--input", clean_inputs, "Usage CSV file(s)");
  cln->add_option("--data", clean_data, "Directory of area CSVs (default: paths.data_dir)");
  cln->add_option("--out", clean_out, "Output directory (default: <out_dir>/clean)");
  cln->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(clean_c);
      finish_config(cfg);
      const fs::path out = clean_out.empty() ? fs::path(cfg.paths.out_dir) / "clean" : fs::path(clean_out);
      const auto in = inputs_of(clean_inputs, clean_data.empty() ? cfg.paths.data_dir : clean_data);
      std::vector<std::string> stages{"clean"};
      with_manifest("clean", args, cfg, out, stages, [&] { clean_areas(in, out); });
    };
  });

  // train-predictor
  Common tp_c;
  std::string tp_data, tp_out, tp_training;
  std::optional<int> tp_epochs;
  std::optional<std::size_t> tp_window;
  bool tp_pool = false;
  auto* tp = app.add_subcommand("train-predictor", "Train the residual-error predictor per area");
  add_common(tp, tp_c);
  tp->add_option("--data", tp_data, "Directory of cleaned area CSVs (default: <out_dir>/clean)");
  tp->add_option("--out", tp_out, "Output directory (default: <out_dir>/predictor)");
  tp->add_option("--epochs", tp_epochs, "Training epochs");
  tp->add_option("--window", tp_window, "Window length W");
  tp->add_option("--training", tp_training, "Training source: auto, reference, history");
  tp->add_flag("--pool", tp_pool, "Train one model on all areas");
  tp->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(tp_c);
      if (tp_epochs) cfg.predictor.model.epochs = *tp_epochs;
      if (tp_window) cfg.predictor.model.window = *tp_window;
      if (!tp_training.empty()) cfg.predictor.training = parse_training_source(tp_training);
      if (tp_pool) cfg.predictor.pool_areas = true;
      finish_config(cfg);
      const fs::path out = tp_out.empty() ? fs::path(cfg.paths.out_dir) / "predictor" : fs::path(tp_out);
      const fs::path data = tp_data.empty() ? fs::path(cfg.paths.out_dir) / "clean" : fs::path(tp_data);
      std::vector<std::string> stages{"train-predictor"};
      with_manifest("train-predictor", args, cfg, out, stages, [&] { train_predictors(cfg, data, out, tp_c.jobs); });
    };
  });

  // detect
  Common det_c;
  std::string det_data, det_models, det_out, det_units;
  std::optional<double> det_t;
  std::optional<std::size_t> det_L;
  auto* det = app.add_subcommand("detect", "Sliding-window malfunction detection");
  add_common(det, det_c);
  det->add_option("--data", det_data, "Directory of cleaned area CSVs (default: <out_dir>/clean)");
  det->add_option("--models", det_models, "Predictor directory (default: <out_dir>/predictor)");
  det->add_option("--out", det_out, "Output directory (default: <out_dir>/detect)");
  det->add_option("--t", det_t, "DPE threshold t");
  det->add_option("--L", det_L, "Window length L in days");
  det->add_option("--units", det_units, "DPE units: standardized or kwh");
  det->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(det_c);
      if (det_t) cfg.detector.params.threshold = *det_t;
      if (det_L) cfg.detector.params.window = *det_L;
      if (!det_units.empty()) cfg.detector.units = parse_detector_units(det_units);
      finish_config(cfg);
      const fs::path root = cfg.paths.out_dir;
      const fs::path out = det_out.empty() ? root / "detect" : fs::path(det_out);
      const fs::path data = det_data.empty() ? root / "clean" : fs::path(det_data);
      const fs::path models = det_models.empty() ? root / "predictor" : fs::path(det_models);
      std::vector<std::string> stages{"detect"};
      with_manifest("detect", args, cfg, out, stages, [&] { detect_areas(cfg, data, models, out, det_c.jobs); });
    };
  });

  // train-classifier
  Common tc_c;
  std::vector<std::string> tc_inputs;
  std::string tc_data, tc_out, tc_detections, tc_mode;
  std::optional<int> tc_epochs;
  bool tc_all = false;
  auto* tc = app.add_subcommand("train-classifier", "Cross-validate and train the TS-RP classifier");
  add_common(tc, tc_c);
  tc->add_option("--input", tc_inputs, "Raw usage CSV file(s)");
  tc->add_option("--data", tc_data, "Directory of raw area CSVs with labels (default: paths.data_dir)");
  tc->add_option("--detections", tc_detections, "detections.json; only flagged areas are used");
  tc->add_flag("--classify-all", tc_all, "Ignore detector gating");
  tc->add_option("--mode", tc_mode, "Input mode: dual, sequence, matrix");
  tc->add_option("--epochs", tc_epochs, "Training epochs");
  tc->add_option("--out", tc_out, "Output directory (default: <out_dir>/classify)");
  tc->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(tc_c);
      if (!tc_mode.empty()) cfg.classifier.input_mode = parse_input_mode(tc_mode);
      if (tc_epochs) cfg.classifier.model.epochs = *tc_epochs;
      finish_config(cfg);
      const fs::path out = tc_out.empty() ? fs::path(cfg.paths.out_dir) / "classify" : fs::path(tc_out);
      const auto in = inputs_of(tc_inputs, tc_data.empty() ? cfg.paths.data_dir : tc_data);
      ClassifierOptions opt;
      if (!tc_detections.empty()) opt.detections = tc_detections;
      opt.classify_all = tc_all;
      opt.jobs = tc_c.jobs;
      std::vector<std::string> stages{"train-classifier"};
      with_manifest("train-classifier", args, cfg, out, stages, [&] { run_classifier(cfg, in, opt, out); });
    };
  });

  // classify
  Common cl_c;
  std::vector<std::string> cl_inputs;
  std::string cl_data, cl_out, cl_model;
  std::optional<double> cl_thr;
  auto* cl = app.add_subcommand("classify", "Score submeters with a trained classifier");
  add_common(cl, cl_c);
  cl->add_option("--model", cl_model, "Classifier checkpoint JSON")->required();
  cl->add_option("--input", cl_inputs, "Raw usage CSV file(s)");
  cl->add_option("--data", cl_data, "Directory of raw area CSVs (default: paths.data_dir)");
  cl->add_option("--threshold", cl_thr, "Decision threshold on the score");
  cl->add_option("--out", cl_out, "Output directory (default: <out_dir>/classify)");
  cl->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(cl_c);
      if (cl_thr) cfg.classifier.decision_threshold = *cl_thr;
      cfg.classifier.proportion_sweep.clear();
      finish_config(cfg);
      if (!fs::exists(cl_model)) throw std::runtime_error("classifier checkpoint '" + cl_model + "' not found");
      const fs::path out = cl_out.empty() ? fs::path(cfg.paths.out_dir) / "classify" : fs::path(cl_out);
      const auto in = inputs_of(cl_inputs, cl_data.empty() ? cfg.paths.data_dir : cl_data);
      ClassifierOptions opt;
      opt.classify_all = true;
      opt.checkpoint = cl_model;
      std::vector<std::string> stages{"classify"};
      with_manifest("classify", args, cfg, out, stages, [&] { run_classifier(cfg, in, opt, out); });
    };
  });

  // evaluate
  std::string ev_scores, ev_run, ev_out, ev_format = "json";
  std::vector<std::string> ev_labels;
  double ev_thr = 0.5;
  auto* ev = app.add_subcommand("evaluate", "Metrics for scored submeters or a full run report");
  ev->add_option("--scores", ev_scores, "classification.csv (area_id,meter_id,score,...)");
  ev->add_option("--labels", ev_labels, "Labels JSON file(s) or directories");
  ev->add_option("--run", ev_run, "Pipeline output directory; rebuilds its report");
  ev->add_option("--format", ev_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  ev->add_option("--threshold", ev_thr, "Decision threshold for the confusion counts");
  ev->add_option("--out", ev_out, "Output directory (default: print to stdout)");
  ev->callback([&] {
    action = [&] {
      if (ev_scores.empty() == ev_run.empty()) throw UsageError("evaluate needs exactly one of --scores or --run");
      std::map<std::string, std::string> files;
      if (!ev_run.empty()) {
        if (!fs::is_directory(ev_run)) throw std::runtime_error("run directory '" + ev_run + "' not found");
        const auto bundle = report_from_run(RunLayout::under(fs::path(), ev_run));
        if (ev_format == "json") {
          files["report.json"] = bundle.files.at("report.json");
        } else {
          files = bundle.files;
          files.erase("report.json");
        }
        if (!bundle.missing.empty()) {
          std::cerr << "missing report sections:";
          for (const auto& m : bundle.missing) std::cerr << ' ' << m;
          std::cerr << '\n';
        }
      } else {
        std::vector<fs::path> labels(ev_labels.begin(), ev_labels.end());
        files = evaluate_scores(ev_scores, labels, ev_format == "csv" ? OutputFormat::csv : OutputFormat::json, ev_thr);
      }
      for (const auto& [name, text] : files) {
        if (ev_out.empty()) {
          if (files.size() > 1) std::cout << "# " << name << '\n';
          std::cout << text;
        } else {
          write_text(fs::path(ev_out) / name, text);
        }
      }
    };
  });

  // pipeline
  Common pl_c;
  std::string pl_data, pl_out, pl_stage = "all", pl_ckpt;
  bool pl_all = false, pl_generate = false;
  auto* pl = app.add_subcommand("pipeline", "clean, train, detect, compare, classify, report");
  add_common(pl, pl_c);
  pl->add_option("--data", pl_data, "Directory of raw area CSVs (default: paths.data_dir)");
  pl->add_option("--out", pl_out, "Output directory (default: paths.out_dir)");
  std::vector<std::string> stage_names{"all"};
  stage_names.insert(stage_names.end(), kStages.begin(), kStages.end());
  pl->add_option("--stage", pl_stage, "Run a single stage")->check(CLI::IsMember(stage_names));
  pl->add_flag("--classify-all", pl_all, "Classify every area, not only flagged ones");
  pl->add_flag("--generate", pl_generate, "Generate the simgen corpus into the data directory first");
  pl->add_option("--classifier-checkpoint", pl_ckpt, "Score with this classifier instead of training one");
  pl->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(pl_c);
      if (!pl_data.empty()) cfg.paths.data_dir = pl_data;
      if (!pl_out.empty()) cfg.paths.out_dir = pl_out;
      finish_config(cfg);
      const RunLayout L = RunLayout::under(cfg.paths.data_dir, cfg.paths.out_dir);
      std::vector<std::string> stages;
      with_manifest("pipeline", args, cfg, L.out, stages, [&] {
        if (pl_generate) generate_corpus(cfg.simgen, L.data);
        auto run = [&](const std::string& name, const fs::path& dir, const std::function<void()>& fn) {
          if (pl_stage != "all" && pl_stage != name) return;
          std::cout << "== " << name << '\n';
          stages.push_back(name);
          try {
            if (pl_stage == "all") fs::remove_all(dir);
            fn();
          } catch (const UsageError&) {
            throw;
          } catch (const std::exception& e) {
            throw StageError(name, e.what());
          }
        };
        run("clean", L.clean, [&] { clean_areas(area_csvs(L.data), L.clean); });
        run("train-predictor", L.predictor, [&] { train_predictors(cfg, L.clean, L.predictor, pl_c.jobs); });
        run("detect", L.detect, [&] { detect_areas(cfg, L.clean, L.predictor, L.detect, pl_c.jobs); });
        run("baselines", L.baselines, [&] {
          if (cfg.baselines.enabled) compare_baselines(cfg, L.clean, L.predictor, L.detect, L.baselines, pl_c.jobs);
        });
        run("train-classifier", L.classify, [&] {
          ClassifierOptions opt;
          opt.detections = L.detect / "detections.json";
          opt.classify_all = pl_all;
          if (!pl_ckpt.empty()) opt.checkpoint = pl_ckpt;
          opt.jobs = pl_c.jobs;
          run_classifier(cfg, area_csvs(L.data), opt, L.classify);
        });
        run("report", L.report, [&] {
          const auto bundle = report_from_run(L);
          eval::write_report(bundle, L.report);
          std::cout << "report written to " << L.report.string();
          if (!bundle.missing.empty()) {
            std::cout << " (missing:";
            for (const auto& m : bundle.missing) std::cout << ' ' << m;
            std::cout << ')';
          }
          std::cout << '\n';
        });
      });
    };
  });

  std::vector<char*> argv;
  std::vector<std::string> owned(args.begin(), args.end());
  if (owned.empty()) owned.emplace_back("meterguard");
  for (auto& a : owned) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    if (action) action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace meterguard::cli
