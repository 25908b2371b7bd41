#pragma once

#include <span>
#include <string>
#include <vector>

namespace meterguard::baselines {

struct NamedPredictions {
  std::string model;
  std::vector<double> predicted;
};

/// Days with predicted E outside [observed - t, observed + t] over a
/// malfunction-containing horizon; a higher rate means the malfunction is more
/// visible to the detector.
struct TargetRateRow {
  double threshold = 0.0;
  std::string model;
  std::size_t days_outside = 0;
  std::size_t days_total = 0;
  double target_rate_pct = 0.0;
};

/// Rows ordered by threshold, then by model as given. Throws
/// std::invalid_argument when a prediction series is misaligned.
std::vector<TargetRateRow> compare_on_detection(std::span<const NamedPredictions> models,
                                                std::span<const double> observed,
                                                std::span<const double> thresholds);

/// threshold,model,days_outside,target_rate_pct
std::string target_rate_csv(std::span<const TargetRateRow> rows);

}  // namespace meterguard::baselines
