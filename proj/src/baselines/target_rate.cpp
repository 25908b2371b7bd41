#include "meterguard/baselines/target_rate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "meterguard/usage_csv.hpp"

namespace meterguard::baselines {

std::vector<TargetRateRow> compare_on_detection(std::span<const NamedPredictions> models,
                                                std::span<const double> observed,
                                                std::span<const double> thresholds) {
  for (const auto& m : models) {
    if (m.predicted.size() != observed.size()) {
      throw std::invalid_argument("predictions of '" + m.model + "' cover " + std::to_string(m.predicted.size()) +
                                  " days, observations " + std::to_string(observed.size()));
    }
  }
  std::vector<TargetRateRow> rows;
  for (const double t : thresholds) {
    for (const auto& m : models) {
      TargetRateRow r;
      r.threshold = t;
      r.model = m.model;
      r.days_total = observed.size();
      for (std::size_t i = 0; i < observed.size(); ++i) {
        if (std::abs(m.predicted[i] - observed[i]) > t) ++r.days_outside;
      }
      r.target_rate_pct = r.days_total ? 100.0 * static_cast<double>(r.days_outside) / static_cast<double>(r.days_total) : 0.0;
      rows.push_back(r);
    }
  }
  return rows;
}

std::string target_rate_csv(std::span<const TargetRateRow> rows) {
  std::ostringstream out;
  out << "threshold,model,days_outside,target_rate_pct\n";
  for (const auto& r : rows) {
    out << format_double(r.threshold) << ',' << r.model << ',' << r.days_outside << ','
        << format_double(r.target_rate_pct) << '\n';
  }
  return out.str();
}

}  // namespace meterguard::baselines
