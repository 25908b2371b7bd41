#include <doctest.h>

#include <random>

#include "meterguard/detector.hpp"

using namespace meterguard;

namespace {
DetectionParams params(double t, std::size_t L) {
  DetectionParams p;
  p.threshold = t;
  p.window = L;
  return p;
}
}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("bounds and dpe") {
    CHECK(bounds(1.0, 0.5).upper == 1.5);
    CHECK(bounds(1.0, 0.5).lower == 0.5);
    CHECK(bounds(0.0, 1.0).upper == 1.0);
    CHECK(bounds(0.0, 1.0).lower == -1.0);
    CHECK_THROWS_AS(bounds(0.0, 0.0), std::invalid_argument);

    const std::vector<double> obs{1.0, 2.0, 1.4}, pred{1.0, 1.0, 1.0};
    const auto d = dpe(obs, pred);
    CHECK(d == std::vector<double>{0.0, 1.0, 1.4 - 1.0});
    CHECK(d[1] > 0.5);
    CHECK(d[2] <= 0.5);
    CHECK_THROWS_AS(dpe(obs, std::vector<double>{1.0}), std::invalid_argument);
  }

  TEST_CASE("sliding window examples") {
    auto r = sliding_window_detect(std::vector<double>{0.6, 0.7, 0.8, 0.9}, params(0.5, 4));
    CHECK(r.flagged);
    CHECK(*r.start_index == 0);

    r = sliding_window_detect(std::vector<double>{0.6, 0.4, 0.8, 0.9, 0.9, 0.9, 0.9}, params(0.5, 4));
    CHECK(r.flagged);
    CHECK(*r.start_index == 2);

    r = sliding_window_detect(std::vector<double>{0.1, 0.5, 0.2, 0.5, 0.5}, params(0.5, 1));
    CHECK_FALSE(r.flagged);
    CHECK_FALSE(r.start_index.has_value());
    CHECK_FALSE(r.predicted_start.has_value());
    CHECK_THROWS_AS(sliding_window_detect(std::vector<double>{1.0}, params(0.5, 4)), std::invalid_argument);
  }

  TEST_CASE("dates and lag") {
    const Date d0 = Date::from_ymd(2015, 1, 1);
    std::vector<Date> dates;
    std::vector<double> series(200, 0.0);
    for (int k = 0; k < 200; ++k) dates.push_back(d0 + k);
    for (int k = 165; k < 200; ++k) series[static_cast<std::size_t>(k)] = 2.0;
    auto r = sliding_window_detect(series, dates, params(0.5, 4));
    REQUIRE(r.flagged);
    CHECK(*r.predicted_start == d0 + 165);
    CHECK_FALSE(r.lag.has_value());
    attach_lag(r, d0 + 100);
    CHECK(*r.lag == 65);
    CHECK(compute_lag(d0, d0) == 0);
    CHECK(compute_lag(d0 + 3, d0 + 10) == -7);

    const auto j = detection_json("a", r, params(0.5, 4));
    CHECK(j.at("flagged") == true);
    CHECK(j.at("lag") == 65);
  }

  TEST_CASE("monotone in threshold and window") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> s(40);
      for (auto& v : s) v = u(rng);
      const double t = 0.1 + 0.8 * u(rng), t2 = t * u(rng) + 1e-3;
      const std::size_t L = 1 + static_cast<std::size_t>(u(rng) * 5), L2 = 1 + static_cast<std::size_t>(u(rng) * L);
      const auto a = sliding_window_detect(s, params(t, L));
      if (!a.flagged) continue;
      const auto b = sliding_window_detect(s, params(t2, L));
      const auto c = sliding_window_detect(s, params(t, std::min(L2, L)));
      REQUIRE(b.flagged);
      REQUIRE(c.flagged);
      CHECK(*b.start_index <= *a.start_index);
      CHECK(*c.start_index <= *a.start_index);
    }
  }
}
