#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/date.hpp"

namespace meterguard {

struct DetectionParams {
  double threshold = 0.5;  // t, in the units of the DPE series
  std::size_t window = 4;  // L, days

  void validate() const;
};

struct Bounds {
  double upper = 0.0;
  double lower = 0.0;
};

/// UB = p + t, LB = p - t. Throws std::invalid_argument unless t > 0.
Bounds bounds(double predicted, double threshold);

/// |observed - predicted| per day. Throws std::invalid_argument on length mismatch.
std::vector<double> dpe(std::span<const double> observed, std::span<const double> predicted);

struct DetectionResult {
  bool flagged = false;
  std::optional<std::size_t> start_index;  // left edge of the first all-exceeding window
  std::optional<Date> predicted_start;
  std::optional<long> lag;
  std::vector<double> dpe_series;
};

/// Left-to-right scan; the first window of L consecutive days with DPE > t sets
/// the start. Throws std::invalid_argument if the series is shorter than L.
DetectionResult sliding_window_detect(std::span<const double> dpe_series, const DetectionParams& params);

/// As above, with dates attached to the series (same length as dpe_series).
DetectionResult sliding_window_detect(std::span<const double> dpe_series, std::span<const Date> dates,
                                      const DetectionParams& params);

/// predicted - actual in whole days; negative means a premature flag.
long compute_lag(Date predicted_start, Date actual_start);

/// Fills in the lag when the true start is known and the area was flagged.
void attach_lag(DetectionResult& result, std::optional<Date> actual_start);

/// {"area_id", "flagged", "predicted_start", "lag", "params": {"t", "L"}}
nlohmann::json detection_json(const std::string& area_id, const DetectionResult& result,
                              const DetectionParams& params);

/// date,observed_E,predicted_E,DPE,exceeds
std::string detection_trace_csv(std::span<const Date> dates, std::span<const double> observed,
                                std::span<const double> predicted, double threshold);

}  // namespace meterguard
