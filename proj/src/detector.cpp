#include "meterguard/detector.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "meterguard/usage_csv.hpp"

namespace meterguard {

void DetectionParams::validate() const {
  if (!(threshold > 0.0)) throw std::invalid_argument("detection threshold t must be > 0");
  if (window < 1) throw std::invalid_argument("detection window L must be >= 1");
}

Bounds bounds(double predicted, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("detection threshold t must be > 0");
  return {predicted + threshold, predicted - threshold};
}

std::vector<double> dpe(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size()) {
    throw std::invalid_argument("observed and predicted series are misaligned (" +
                                std::to_string(observed.size()) + " vs " +
                                std::to_string(predicted.size()) + " days)");
  }
  std::vector<double> out(observed.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(observed[i] - predicted[i]);
  return out;
}

DetectionResult sliding_window_detect(std::span<const double> series, const DetectionParams& params) {
  params.validate();
  if (series.size() < params.window) {
    throw std::invalid_argument("DPE series of " + std::to_string(series.size()) +
                                " days is shorter than window " + std::to_string(params.window));
  }
  DetectionResult r;
  r.dpe_series.assign(series.begin(), series.end());
  std::size_t run = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    run = series[i] > params.threshold ? run + 1 : 0;
    if (run == params.window) {
      r.flagged = true;
      r.start_index = i + 1 - params.window;
      break;
    }
  }
  return r;
}

DetectionResult sliding_window_detect(std::span<const double> series, std::span<const Date> dates,
                                      const DetectionParams& params) {
  if (dates.size() != series.size()) {
    throw std::invalid_argument("DPE series and dates differ in length");
  }
  DetectionResult r = sliding_window_detect(series, params);
  if (r.start_index) r.predicted_start = dates[*r.start_index];
  return r;
}

long compute_lag(Date predicted_start, Date actual_start) { return predicted_start - actual_start; }

void attach_lag(DetectionResult& result, std::optional<Date> actual_start) {
  result.lag.reset();
  if (result.predicted_start && actual_start) result.lag = compute_lag(*result.predicted_start, *actual_start);
}

nlohmann::json detection_json(const std::string& area_id, const DetectionResult& result,
                              const DetectionParams& params) {
  nlohmann::json j = {{"area_id", area_id},
                      {"flagged", result.flagged},
                      {"predicted_start", nullptr},
                      {"lag", nullptr},
                      {"params", {{"t", params.threshold}, {"L", params.window}}}};
  if (result.predicted_start) j["predicted_start"] = result.predicted_start->iso();
  if (result.lag) j["lag"] = *result.lag;
  return j;
}

std::string detection_trace_csv(std::span<const Date> dates, std::span<const double> observed,
                                std::span<const double> predicted, double threshold) {
  if (dates.size() != observed.size()) throw std::invalid_argument("dates and observed differ in length");
  const auto d = dpe(observed, predicted);
  std::ostringstream out;
  out << "date,observed_E,predicted_E,DPE,exceeds\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << dates[i].iso() << ',' << format_double(observed[i]) << ',' << format_double(predicted[i])
        << ',' << format_double(d[i]) << ',' << (d[i] > threshold ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace meterguard
