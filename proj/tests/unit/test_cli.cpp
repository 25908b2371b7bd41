#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "meterguard/cli/artifacts.hpp"
#include "meterguard/cli/commands.hpp"
#include "meterguard/cli/config.hpp"

using namespace meterguard;
using namespace meterguard::cli;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("meterguard-unit-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "meterguard");
  return run_cli(args);
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kManifestName)
      out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return out;
}

std::map<std::string, double> csv_metrics(const std::string& text) {
  std::map<std::string, double> m;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    m[line.substr(0, c)] = std::stod(line.substr(c + 1));
  }
  return m;
}

json small_config(const fs::path& root, int clean_areas) {
  return json{{"seed", 3},
              {"paths", {{"data_dir", (root / "data").string()}, {"out_dir", (root / "out").string()}}},
              {"simgen", {{"areas", 4}, {"submeters", 6}, {"days", 300}, {"clean_areas", clean_areas}, {"start_window", {0.4, 0.6}},
                 {"area", {{"seasonal_amplitude", 0.0}, {"noise_sigma", 0.1}, {"overhead_noise_sigma", 0.01}}}}},
              {"predictor", {{"epochs", 10}, {"learning_rate", 0.003}, {"window", 20}, {"hidden", {8, 8}}}},
              {"detector", {{"units", "kwh"}}},
              {"classifier",
               {{"epochs", 2},
                {"length", 32},
                {"folds", 2},
                {"sequence_blocks", {{{"filters", 4}, {"kernel", 3}, {"pool", 2}}}},
                {"matrix_blocks", {{{"filters", 2}, {"kernel", 3}, {"pool", 4}}}},
                {"merge_width", 8}}},
              {"baselines", {{"gbr", {{"n_trees", 5}}}}}};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config defaults mirror module defaults and unknown keys fail") {
    const RunConfig c = RunConfig::from_json(json::object());
    CHECK(c.predictor.model.to_json() == PredictorConfig{}.to_json());
    CHECK(c.classifier.model.to_json() == TsRpConfig{}.to_json());
    CHECK(c.detector.params.threshold == DetectionParams{}.threshold);
    CHECK(c.detector.params.window == DetectionParams{}.window);
    CHECK(c.simgen.n_areas == CorpusConfig{}.n_areas);
    CHECK(c.simgen.fraction_inaccurate == CorpusConfig{}.fraction_inaccurate);
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());

    CHECK_THROWS_WITH_AS(RunConfig::from_json(json{{"predictor", {{"epoch", 3}}}}), doctest::Contains("epoch"), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"bogus", 1}}), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"simgen", {{"fraction", 1.5}}}}), UsageError);

    auto seeded = RunConfig::from_json(json{{"seed", 99}, {"predictor", {{"seed", 5}}}});
    CHECK(seeded.predictor.model.seed == 5);
    CHECK(seeded.simgen.seed == 99);
    CHECK(seeded.classifier.model.seed == 99);
  }

  TEST_CASE("generate writes the corpus deterministically and validates flags") {
    const auto root = scratch("generate");
    const std::vector<std::string> args{"generate", "--areas", "5", "--submeters", "10", "--days", "60",
                                        "--fraction", "0.3", "--seed", "7"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", (root / "a").string()});
    b.insert(b.end(), {"--out", (root / "b").string()});
    REQUIRE(run(a) == 0);
    REQUIRE(run(b) == 0);
    CHECK(snapshot(root / "a") == snapshot(root / "b"));
    CHECK(area_csvs(root / "a").size() == 5);
    for (const auto& csv : area_csvs(root / "a")) {
      const json labels = read_json(labels_path(csv.parent_path(), csv.stem().string()));
      int bad = 0;
      for (const auto& [id, l] : labels.at("labels").items()) bad += l == "inaccurate";
      CHECK(bad == 3);
    }
    CHECK(fs::exists(root / "a" / kManifestName));
    CHECK(run({"generate", "--fraction", "1.5", "--out", (root / "c").string()}) == 2);
    CHECK(run({"generate", "--no-such-flag"}) == 2);
    CHECK(run({"--help"}) == 0);
  }

  TEST_CASE("evaluate names missing inputs and encodes consistently") {
    const auto root = scratch("evaluate");
    write_text(root / "scores.csv", "area_id,meter_id,score\nA,m1,0.9\nA,m2,0.2\nA,m3,0.6\n");
    write_text(root / "A.labels.json",
               json{{"area_id", "A"}, {"labels", {{"m1", "inaccurate"}, {"m2", "accurate"}, {"m3", "accurate"}}},
                    {"spec", {{"targets", {"m1"}}, {"alpha", 0.01}, {"noise_sigma_N", 0.0}, {"seed", 0}, {"start_day", {{"m1", 3}}}}}}
                   .dump());
    try {
      evaluate_scores(root / "scores.csv", {}, OutputFormat::json);
      FAIL("expected failure");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("scores.csv") != std::string::npos);
    }
    try {
      evaluate_scores(root / "scores.csv", {root / "nope.labels.json"}, OutputFormat::json);
      FAIL("expected failure");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("nope.labels.json") != std::string::npos);
    }
    CHECK(run({"evaluate", "--scores", (root / "scores.csv").string(), "--labels", (root / "nope.labels.json").string()}) != 0);

    const auto j = json::parse(evaluate_scores(root / "scores.csv", {root / "A.labels.json"}, OutputFormat::json).at("evaluation.json"));
    const auto c = csv_metrics(evaluate_scores(root / "scores.csv", {root}, OutputFormat::csv).at("evaluation.csv"));
    CHECK(j.at("roc_auc").get<double>() == 1.0);
    CHECK(c.at("roc_auc") == j.at("roc_auc").get<double>());
    CHECK(c.at("pr_auc") == j.at("pr_auc").get<double>());
    CHECK(c.at("tp") == 1.0);
    CHECK(c.at("fp") == 1.0);
  }

  TEST_CASE("clean-only corpus skips the classifier and stages run alone") {
    const auto root = scratch("pipeline");
    write_text(root / "config.json", small_config(root, 4).dump());
    const auto cfg = (root / "config.json").string();
    REQUIRE(run({"generate", "--config", cfg}) == 0);
    REQUIRE(run({"pipeline", "--config", cfg}) == 0);
    const json det = read_json(root / "out" / "detect" / "detections.json");
    for (const auto& a : det.at("areas")) CHECK(a.at("flagged") == false);
    CHECK(fs::exists(root / "out" / "classify" / "skipped.json"));
    CHECK_FALSE(fs::exists(root / "out" / "classify" / "classification.csv"));
    CHECK(fs::exists(root / "out" / "report" / "report.json"));

    const auto predictor = snapshot(root / "out" / "predictor");
    fs::remove_all(root / "out" / "detect");
    REQUIRE(run({"pipeline", "--config", cfg, "--stage", "detect"}) == 0);
    CHECK(fs::exists(root / "out" / "detect" / "detections.json"));
    CHECK(snapshot(root / "out" / "predictor") == predictor);

    fs::remove_all(root / "out" / "predictor");
    CHECK(run({"pipeline", "--config", cfg, "--stage", "detect"}) == 1);
    CHECK(run({"pipeline", "--config", (root / "missing.json").string()}) == 2);
  }
}
