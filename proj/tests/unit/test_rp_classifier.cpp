#include <doctest.h>

#include <random>
#include <numeric>

#include "meterguard/nn/grad_check.hpp"
#include "meterguard/recurrence_plot.hpp"
#include "meterguard/rp_classifier.hpp"
#include "support/differentiable.hpp"

using namespace meterguard;
using meterguard::testing::random_tensor;
using meterguard::testing::tiny_tsrp_config;
using meterguard::testing::TsRpBce;

namespace {

std::vector<SubmeterSample> toy_samples(std::size_t n, const TsRpConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<SubmeterSample> out;
  for (std::size_t k = 0; k < n; ++k) {
    const int label = static_cast<int>(k % 2);
    std::vector<double> raw(cfg.length + 4);
    for (std::size_t i = 0; i < raw.size(); ++i)
      raw[i] = 10.0 + z(rng) + (label ? 0.08 * static_cast<double>(i) : 0.0);
    out.push_back(make_sample("a" + std::to_string(k / 4), "m" + std::to_string(k), raw, label, cfg));
  }
  return out;
}

}  // namespace

TEST_SUITE("rp_classifier") {
  TEST_CASE("recurrence plot examples") {
    const std::vector<double> c(6, 3.0);
    for (double v : recurrence_plot(c, RpMode::binary).values) CHECK(v == 1.0);
    const auto g = recurrence_plot(std::vector<double>{0, 1, 2}, RpMode::grayscale);
    const double expect[9] = {1, 0.5, 0, 0.5, 1, 0.5, 0, 0.5, 1};
    for (int k = 0; k < 9; ++k) CHECK(g.values[static_cast<std::size_t>(k)] == doctest::Approx(expect[k]).epsilon(1e-15));
    CHECK_THROWS_AS(recurrence_plot(std::vector<double>{1.0}, RpMode::binary), std::invalid_argument);
    CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  }

  TEST_CASE("recurrence plot symmetry and invariances") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> s(30), shifted(30), scaled(30);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = z(rng);
        shifted[i] = s[i] + 17.0;
        scaled[i] = 2.5 * s[i];
      }
      const auto b = recurrence_plot(s, RpMode::binary);
      for (std::size_t i = 0; i < b.n; ++i) {
        CHECK(b.at(i, i) == 1.0);
        for (std::size_t j = 0; j < b.n; ++j) CHECK(b.at(i, j) == b.at(j, i));
      }
      const auto g = recurrence_plot(s, RpMode::grayscale), gs = recurrence_plot(scaled, RpMode::grayscale);
      const auto gt = recurrence_plot(shifted, RpMode::grayscale);
      for (std::size_t k = 0; k < g.values.size(); ++k) {
        CHECK(g.values[k] == doctest::Approx(gs.values[k]).epsilon(1e-12));
        CHECK(g.values[k] == doctest::Approx(gt.values[k]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("series preparation keeps the tail and left-pads") {
    std::vector<double> raw(200);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<double>(i);
    const auto a = prepare_series(raw, 128);
    REQUIRE(a.size() == 128);
    const auto b = prepare_series(std::span<const double>(raw).subspan(72), 128);
    CHECK(a == b);

    const auto p = prepare_series(std::span<const double>(raw).first(100), 128);
    for (std::size_t i = 0; i < 28; ++i) CHECK(p[i] == 0.0);
    CHECK(p[28] != 0.0);
    double mean = 0.0;
    for (std::size_t i = 28; i < 128; ++i) mean += p[i] / 100.0;
    CHECK(std::abs(mean) < 1e-12);

    for (double v : prepare_series(std::vector<double>(50, 7.0), 64)) CHECK(v == 0.0);
    CHECK_THROWS_AS(prepare_series(std::vector<double>{}, 8), std::invalid_argument);
  }

  TEST_CASE("zeroed matrix branch reduces dual to sequence-only") {
    const auto cfg = tiny_tsrp_config();
    TsRpModel dual(cfg, InputMode::dual);
    dual.initialize(3);
    TsRpModel seq(cfg, InputMode::sequence_only);
    seq.initialize(4);

    auto* mb = dual.matrix_branch();
    auto& last = static_cast<nn::Dense&>(mb->layer(mb->size() - 2));
    last.weight().value.fill(0.0);
    last.bias().value.fill(0.0);
    const auto src = dual.sequence_branch()->parameters(), dst = seq.sequence_branch()->parameters();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k]->value = src[k]->value;
    const auto hs = dual.head().parameters(), hd = seq.head().parameters();
    for (std::size_t k = 0; k < hs.size(); ++k) hd[k]->value = hs[k]->value;

    std::mt19937_64 rng(1);
    const auto s = random_tensor({3, cfg.length, 1}, rng);
    const auto r = random_tensor({3, cfg.length, cfg.length, 1}, rng);
    CHECK(dual.forward(s, r) == seq.forward(s, nn::Tensor{}));
  }

  TEST_CASE("finite differences over every input mode") {
    const auto cfg = tiny_tsrp_config();
    for (auto mode : {InputMode::dual, InputMode::sequence_only, InputMode::matrix_only}) {
      CAPTURE(to_string(mode));
      TsRpModel m(cfg, mode);
      m.initialize(5);
      std::mt19937_64 rng(6);
      TsRpBce f(m, random_tensor({2, cfg.length, 1}, rng), random_tensor({2, cfg.length, cfg.length, 1}, rng), {1.0, 0.0});
      nn::GradCheckOptions o;
      o.max_entries_per_parameter = 40;
      const auto rep = nn::grad_check(f, o);
      CHECK(rep.passed());
      CHECK(rep.checked > 0);
    }
  }

  TEST_CASE("cross validation covers every sample once regardless of jobs") {
    auto cfg = tiny_tsrp_config();
    cfg.epochs = 3;
    cfg.folds = 4;
    const auto samples = toy_samples(16, cfg, 8);
    const auto a = train_cv(samples, cfg, InputMode::dual, 1);
    const auto b = train_cv(samples, cfg, InputMode::dual, 3);
    CHECK(a.oof_scores.size() == samples.size());
    CHECK(a.oof_scores == b.oof_scores);
    CHECK(a.fold == b.fold);
    std::vector<int> counts(4, 0);
    for (int f : a.fold) ++counts[static_cast<std::size_t>(f)];
    for (int c : counts) CHECK(c == 4);
    CHECK(a.fold_roc_auc.size() == 4);
  }

  TEST_CASE("trained model separates an easy drift and round trips") {
    auto cfg = tiny_tsrp_config();
    cfg.epochs = 30;
    cfg.learning_rate = 3e-3;
    const auto samples = toy_samples(24, cfg, 9);
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto m = train_classifier(samples, idx, cfg, InputMode::dual);
    const auto p = m.predict(samples);
    CHECK(p == m.predict(samples));
    double pos = 0.0, neg = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) (samples[k].label ? pos : neg) += p[k] / 12.0;
    CHECK(pos > 0.5);
    CHECK(pos > neg);
    const auto back = TsRpModel::from_checkpoint(m.to_checkpoint());
    CHECK(back.predict(samples) == p);

    const auto csv = classification_csv(samples, p);
    CHECK(csv.rfind("area_id,meter_id,score,label_pred,label_true\n", 0) == 0);
  }
}
