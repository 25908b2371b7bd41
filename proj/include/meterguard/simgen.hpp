#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/data_model.hpp"

namespace meterguard {

/// Synthetic residential area. Submeter usage on day d is
///   base_j * (1 + (seasonal_amplitude / base_usage_mean) * cos(2pi (doy - peak) / 365.25))
///          * weekday_effect[wd] + Normal(0, noise_sigma),
/// clamped at zero. The master reads SSub plus a load-proportional overhead.
struct AreaConfig {
  std::string area_id = "area-000";
  Date start_date = Date::from_ymd(2014, 8, 1);
  int n_submeters = 10;
  int n_days = 770;
  double base_usage_mean = 10.0;    // kWh/day
  double base_usage_spread = 0.0;   // log-normal sd of the per-meter base; 0 = identical meters
  double seasonal_amplitude = 3.0;  // kWh
  int seasonal_peak_day = 15;       // day of year with peak demand
  std::array<double, 7> weekday_effect{0.95, 0.95, 0.95, 0.95, 1.0, 1.1, 1.1};
  double noise_sigma = 1.0;           // kWh
  double master_overhead_mean = 5.0;  // kWh, losses between master and submeters
  double overhead_noise_sigma = 0.1;  // kWh
  std::uint64_t seed = 0;

  void validate() const;
};

struct GeneratedArea {
  UsageDataset dataset;
  std::vector<double> overhead;  // per day, master minus SSub as generated
};

/// Deterministic given config.seed. Throws std::invalid_argument on invalid config.
UsageDataset generate_area(const AreaConfig& config);
GeneratedArea generate_area_detailed(const AreaConfig& config);

/// Drift specification: Usage_new(i) = (1 + alpha (i - s)) Usage(i) + N for i >= s.
struct InjectionSpec {
  std::map<std::string, int> start_day;  // target meter -> s (day index)
  double alpha = 0.01;
  double noise_sigma_n = 0.0;  // kWh, sd of N
  std::uint64_t seed = 0;

  std::vector<std::string> targets() const;
  bool is_target(const std::string& meter_id) const { return start_day.count(meter_id) > 0; }
};

/// Applies the drift to one submeter's series. Day index i is the position in
/// date order. Throws std::invalid_argument if meter_id is not a target or s is
/// outside the series.
DailySeries inject_malfunction(const DailySeries& series, const InjectionSpec& spec,
                               const std::string& meter_id);

enum class MeterLabel { accurate = 0, inaccurate = 1 };
const char* to_string(MeterLabel label);
MeterLabel parse_meter_label(const std::string& s);

struct LabeledArea {
  UsageDataset dataset;        // after injection
  UsageDataset clean_dataset;  // before injection
  InjectionSpec spec;
  std::map<std::string, MeterLabel> labels;

  bool has_malfunction() const { return !spec.start_day.empty(); }
  /// Earliest injection start as a date, if any meter is corrupted.
  std::optional<Date> malfunction_start() const;
};

/// Applies `spec` to every target of `clean` and labels the submeters.
LabeledArea apply_injection(const UsageDataset& clean, const InjectionSpec& spec);

struct CorpusConfig {
  AreaConfig area;  // template; area_id and seed are assigned per area
  int n_areas = 20;
  double fraction_inaccurate = 0.30;
  int n_clean_areas = 0;  // areas generated without any injection
  double start_window_lo = 0.25;  // fraction of n_days
  double start_window_hi = 0.75;
  double alpha = 0.01;
  std::optional<double> noise_sigma_n;  // default: 1% of base_usage_mean
  std::uint64_t seed = 7;

  void validate() const;
  /// Number of corrupted submeters in a malfunctioning area: ceil(fraction * n).
  int targets_per_area() const;
};

/// Areas are independent: area k draws only from streams derived from (seed, k).
std::vector<LabeledArea> make_labeled_corpus(const CorpusConfig& config);
LabeledArea make_labeled_area(const CorpusConfig& config, int area_index);

/// Stream derived from (seed, index, tag); distinct tags give independent streams.
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

nlohmann::json labels_json(const LabeledArea& area);

/// Labels and injection spec as stored in a labels JSON file.
struct AreaLabels {
  std::string area_id;
  std::map<std::string, MeterLabel> labels;
  InjectionSpec spec;
};
AreaLabels parse_labels_json(const nlohmann::json& j);

}  // namespace meterguard
