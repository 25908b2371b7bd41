#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "meterguard/eval/metrics.hpp"
#include "meterguard/eval/report.hpp"

using namespace meterguard::eval;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

double brute_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, all = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        all += 1.0;
        tp += y[i];
      }
    ap += (tp / pos - prev_recall) * (tp / all);
    prev_recall = tp / pos;
  }
  return ap;
}

void random_instance(std::mt19937_64& rng, std::vector<double>& s, std::vector<int>& y) {
  std::uniform_int_distribution<int> n(2, 30), lvl(0, 6), bit(0, 1);
  do {
    const int len = n(rng);
    s.assign(static_cast<std::size_t>(len), 0.0);
    y.assign(static_cast<std::size_t>(len), 0);
    for (int i = 0; i < len; ++i) {
      s[static_cast<std::size_t>(i)] = lvl(rng) / 6.0;
      y[static_cast<std::size_t>(i)] = bit(rng);
    }
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("auc examples") {
    const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> y{1, 1, 0, 0};
    CHECK(roc_auc(s, y) == 1.0);
    CHECK(pr_auc(s, y) == 1.0);
    CHECK(roc_auc(std::vector<double>(4, 0.3), std::vector<int>{1, 0, 1, 0}) == 0.5);
    CHECK(pr_auc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{0, 0, 0, 1}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(pr_auc(s, std::vector<int>{0, 0, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 0}), std::invalid_argument);
  }

  TEST_CASE("auc against exhaustive oracles") {
    std::mt19937_64 rng(12);
    std::vector<double> s;
    std::vector<int> y;
    for (int trial = 0; trial < 50; ++trial) {
      random_instance(rng, s, y);
      CHECK(roc_auc(s, y) == doctest::Approx(brute_auc(s, y)).epsilon(1e-14));
      CHECK(pr_auc(s, y) == doctest::Approx(brute_ap(s, y)).epsilon(1e-14));
      std::vector<double> neg(s.size()), mono(s.size());
      std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
      std::transform(s.begin(), s.end(), mono.begin(), [](double v) { return std::exp(3.0 * v) - 2.0; });
      CHECK(roc_auc(s, y) + roc_auc(neg, y) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(roc_auc(mono, y) == roc_auc(s, y));
    }
  }

  TEST_CASE("curves") {
    const std::vector<double> s{0.9, 0.5, 0.5, 0.1};
    const std::vector<int> y{1, 0, 1, 0};
    const auto roc = roc_curve(s, y);
    REQUIRE(roc.size() == 4);
    CHECK(roc.front().x == 0.0);
    CHECK(roc.front().y == 0.0);
    CHECK(roc.back().x == 1.0);
    CHECK(roc.back().y == 1.0);
    const auto pr = pr_curve(s, y);
    CHECK(pr.size() == 3);
    CHECK(pr.front().y == 1.0);
  }

  TEST_CASE("stratified folds") {
    std::vector<int> y(100, 0);
    std::fill(y.begin(), y.begin() + 50, 1);
    const auto f = stratified_kfold(y, 5, 3);
    CHECK(f == stratified_kfold(y, 5, 3));
    for (int k = 0; k < 5; ++k) {
      int pos = 0, neg = 0;
      for (std::size_t i = 0; i < y.size(); ++i)
        if (f[i] == k) (y[i] ? pos : neg)++;
      CHECK(pos == 10);
      CHECK(neg == 10);
    }
    std::vector<int> seven(12, 0);
    std::fill(seven.begin(), seven.begin() + 7, 1);
    const auto g = stratified_kfold(seven, 5, 1);
    for (int k = 0; k < 5; ++k) {
      int pos = 0;
      for (std::size_t i = 0; i < 7; ++i) pos += g[i] == k;
      CHECK((pos == 1 || pos == 2));
    }
    CHECK_THROWS_AS(stratified_kfold(std::vector<int>{1, 1, 0, 0, 0}, 3, 0), std::invalid_argument);
  }

  TEST_CASE("summaries and report skeleton") {
    const std::vector<double> v{0.75, 0.89};
    const auto m = mean_std(v);
    CHECK(m.mean == doctest::Approx(0.82));
    CHECK(format_mean_std(m) == "0.82 ± 0.07");
    const std::vector<long> lags{-2, 5, 9};
    const auto l = lag_stats(lags);
    CHECK(l.flagged == 3);
    CHECK(l.premature == 1);
    CHECK(l.median == 5.0);

    const auto r = experiment_report(ReportInputs{});
    CHECK_FALSE(r.files.empty());
    CHECK(r.missing.size() == 5);
    CHECK(r.files.count("report.json") == 1);
  }
}
