#include "meterguard/recurrence_plot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meterguard {

const char* to_string(RpMode mode) { return mode == RpMode::binary ? "binary" : "grayscale"; }

RpMode parse_rp_mode(const std::string& s) {
  if (s == "binary") return RpMode::binary;
  if (s == "grayscale") return RpMode::grayscale;
  throw std::invalid_argument("unknown recurrence plot mode '" + s + "'");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RecurrencePlot recurrence_plot(std::span<const double> series, RpMode mode, double eps_percentile) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("recurrence plot needs at least two points");
  RecurrencePlot rp;
  rp.n = n;
  rp.values.assign(n * n, 0.0);
  std::vector<double> upper;
  upper.reserve(n * (n - 1) / 2);
  double max_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::abs(series[i] - series[j]);
      rp.values[i * n + j] = rp.values[j * n + i] = d;
      upper.push_back(d);
      max_d = std::max(max_d, d);
    }
  }
  if (mode == RpMode::binary) {
    // D is symmetric, so the upper triangle has the off-diagonal distribution.
    const double eps = percentile(std::move(upper), eps_percentile);
    for (double& v : rp.values) v = v <= eps ? 1.0 : 0.0;
  } else {
    for (double& v : rp.values) v = max_d > 0.0 ? 1.0 - v / max_d : 1.0;
  }
  return rp;
}

}  // namespace meterguard
