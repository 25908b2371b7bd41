#pragma once

#include <span>
#include <string>
#include <vector>

namespace meterguard {

enum class RpMode { binary, grayscale };
const char* to_string(RpMode mode);
RpMode parse_rp_mode(const std::string& s);

/// Square matrix with entries in [0, 1], stored row-major.
struct RecurrencePlot {
  std::size_t n = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Linear-interpolation percentile, q in [0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double q);

/// Distances D[i][j] = |x_i - x_j| (embedding dimension 1, delay 1).
/// binary: 1 where D <= eps, eps = `eps_percentile` of the off-diagonal distances.
/// grayscale: 1 - D / max(D), all ones for a constant series.
/// Throws std::invalid_argument for fewer than two points.
RecurrencePlot recurrence_plot(std::span<const double> series, RpMode mode, double eps_percentile = 10.0);

}  // namespace meterguard
