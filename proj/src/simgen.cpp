#include "meterguard/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace meterguard {

void AreaConfig::validate() const {
  if (n_days < 1) throw std::invalid_argument("n_days must be >= 1");
  if (n_submeters < 1) throw std::invalid_argument("n_submeters must be >= 1");
  if (!(base_usage_mean > 0.0)) throw std::invalid_argument("base_usage_mean must be > 0");
  if (!(master_overhead_mean > 0.0)) throw std::invalid_argument("master_overhead_mean must be > 0");
  if (noise_sigma < 0.0 || overhead_noise_sigma < 0.0 || base_usage_spread < 0.0) {
    throw std::invalid_argument("noise and spread parameters must be >= 0");
  }
  for (double w : weekday_effect) {
    if (!(w > 0.0)) throw std::invalid_argument("weekday_effect multipliers must be > 0");
  }
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

namespace {

std::string meter_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "m%03d", j + 1);
  return buf;
}

std::uint64_t string_key(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

GeneratedArea generate_area_detailed(const AreaConfig& cfg) {
  cfg.validate();
  auto rng = derive_rng(cfg.seed, 0, 0);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<double> base(static_cast<std::size_t>(cfg.n_submeters), cfg.base_usage_mean);
  if (cfg.base_usage_spread > 0.0) {
    const double s = cfg.base_usage_spread;
    for (auto& b : base) b = cfg.base_usage_mean * std::exp(s * unit(rng) - 0.5 * s * s);
  }
  const double weekday_mean =
      std::accumulate(cfg.weekday_effect.begin(), cfg.weekday_effect.end(), 0.0) / 7.0;
  const double rel_amp = cfg.seasonal_amplitude / cfg.base_usage_mean;

  GeneratedArea out;
  out.dataset.area_id = cfg.area_id;
  std::vector<std::string> ids;
  for (int j = 0; j < cfg.n_submeters; ++j) {
    ids.push_back(meter_name(j));
    out.dataset.submeters[ids.back()];
  }
  out.overhead.reserve(static_cast<std::size_t>(cfg.n_days));

  std::vector<double> day_usage(ids.size());
  for (int day = 0; day < cfg.n_days; ++day) {
    const Date date = cfg.start_date + day;
    const double season =
        1.0 + rel_amp * std::cos(2.0 * std::numbers::pi *
                                 (date.day_of_year() - cfg.seasonal_peak_day) / 365.25);
    const double weekday = cfg.weekday_effect[date.weekday_index()];
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * unit(rng) : 0.0;
      day_usage[j] = std::max(0.0, base[j] * season * weekday + noise);
    }
    // Sum in meter-id order, the same order drop_invalid_days uses, so the
    // master is never below the recomputed SSub.
    double ssub = 0.0;
    for (const auto& [id, series] : out.dataset.submeters) {
      const auto j = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
      ssub += day_usage[j];
    }
    const double load = season * weekday / weekday_mean;
    double overhead = cfg.master_overhead_mean * load +
                      (cfg.overhead_noise_sigma > 0.0 ? cfg.overhead_noise_sigma * unit(rng) : 0.0);
    overhead = std::max(overhead, 0.05 * cfg.master_overhead_mean);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      out.dataset.submeters[ids[j]].emplace(date, day_usage[j]);
    }
    out.dataset.master.emplace(date, ssub + overhead);
    out.overhead.push_back(overhead);
  }
  return out;
}

UsageDataset generate_area(const AreaConfig& config) {
  return generate_area_detailed(config).dataset;
}

std::vector<std::string> InjectionSpec::targets() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : start_day) out.push_back(id);
  return out;
}

DailySeries inject_malfunction(const DailySeries& series, const InjectionSpec& spec,
                               const std::string& meter_id) {
  auto it = spec.start_day.find(meter_id);
  if (it == spec.start_day.end()) {
    throw std::invalid_argument("meter '" + meter_id + "' is not an injection target");
  }
  const int s = it->second;
  if (s < 0 || static_cast<std::size_t>(s) >= series.size()) {
    throw std::invalid_argument("start day " + std::to_string(s) + " outside series of length " +
                                std::to_string(series.size()));
  }
  if (spec.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");

  auto rng = derive_rng(spec.seed, string_key(meter_id), 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  DailySeries out;
  int i = 0;
  for (const auto& [date, usage] : series) {
    if (i < s) {
      out.emplace_hint(out.end(), date, usage);
    } else {
      const double noise = spec.noise_sigma_n > 0.0 ? spec.noise_sigma_n * unit(rng) : 0.0;
      const double drifted = (1.0 + spec.alpha * static_cast<double>(i - s)) * usage + noise;
      out.emplace_hint(out.end(), date, std::max(0.0, drifted));
    }
    ++i;
  }
  return out;
}

const char* to_string(MeterLabel label) {
  return label == MeterLabel::inaccurate ? "inaccurate" : "accurate";
}

MeterLabel parse_meter_label(const std::string& s) {
  if (s == "accurate") return MeterLabel::accurate;
  if (s == "inaccurate") return MeterLabel::inaccurate;
  throw std::invalid_argument("unknown meter label '" + s + "'");
}

std::optional<Date> LabeledArea::malfunction_start() const {
  if (spec.start_day.empty()) return std::nullopt;
  int s = spec.start_day.begin()->second;
  for (const auto& [_, day] : spec.start_day) s = std::min(s, day);
  return clean_dataset.first_date() + s;
}

LabeledArea apply_injection(const UsageDataset& clean, const InjectionSpec& spec) {
  LabeledArea area;
  area.clean_dataset = clean;
  area.dataset = clean;
  area.spec = spec;
  for (const auto& [id, series] : clean.submeters) {
    if (spec.is_target(id)) {
      area.dataset.submeters[id] = inject_malfunction(series, spec, id);
      area.labels[id] = MeterLabel::inaccurate;
    } else {
      area.labels[id] = MeterLabel::accurate;
    }
  }
  for (const auto& [id, _] : spec.start_day) {
    if (!clean.submeters.count(id)) {
      throw std::invalid_argument("injection target '" + id + "' is not a submeter of '" +
                                  clean.area_id + "'");
    }
  }
  return area;
}

void CorpusConfig::validate() const {
  area.validate();
  if (n_areas < 1) throw std::invalid_argument("n_areas must be >= 1");
  if (!(fraction_inaccurate > 0.0 && fraction_inaccurate < 1.0)) {
    throw std::invalid_argument("fraction_inaccurate must lie in (0, 1)");
  }
  if (n_clean_areas < 0 || n_clean_areas > n_areas) {
    throw std::invalid_argument("n_clean_areas must lie in [0, n_areas]");
  }
  if (!(0.0 <= start_window_lo && start_window_lo <= start_window_hi && start_window_hi < 1.0)) {
    throw std::invalid_argument("start window must satisfy 0 <= lo <= hi < 1");
  }
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (n_clean_areas < n_areas && targets_per_area() == 0) {
    throw std::invalid_argument("fraction_inaccurate yields no corrupted submeters");
  }
}

int CorpusConfig::targets_per_area() const {
  // Guard against 0.3 * 10 evaluating to 3.0000000000000004.
  const double raw = fraction_inaccurate * area.n_submeters;
  return static_cast<int>(std::ceil(raw - 1e-9));
}

LabeledArea make_labeled_area(const CorpusConfig& config, int k) {
  const auto index = static_cast<std::uint64_t>(k);
  AreaConfig ac = config.area;
  char name[32];
  std::snprintf(name, sizeof name, "area-%03d", k);
  ac.area_id = name;
  ac.seed = derive_rng(config.seed, index, 10)();
  const UsageDataset clean = generate_area(ac);

  // Which areas stay clean is drawn from a corpus-level stream so it does not
  // depend on generation order.
  auto corpus_rng = derive_rng(config.seed, 0, 11);
  std::vector<int> order(static_cast<std::size_t>(config.n_areas));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), corpus_rng);
  const bool is_clean =
      std::find(order.begin(), order.begin() + config.n_clean_areas, k) !=
      order.begin() + config.n_clean_areas;

  InjectionSpec spec;
  spec.alpha = config.alpha;
  spec.noise_sigma_n = config.noise_sigma_n.value_or(0.01 * ac.base_usage_mean);
  auto rng = derive_rng(config.seed, index, 12);
  spec.seed = rng();
  if (!is_clean) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : clean.submeters) ids.push_back(id);
    std::shuffle(ids.begin(), ids.end(), rng);
    const int lo = static_cast<int>(std::ceil(config.start_window_lo * ac.n_days));
    const int hi = std::min(ac.n_days - 1,
                            static_cast<int>(std::floor(config.start_window_hi * ac.n_days)));
    std::uniform_int_distribution<int> start(lo, std::max(lo, hi));
    for (int t = 0; t < config.targets_per_area(); ++t) {
      spec.start_day[ids[static_cast<std::size_t>(t)]] = start(rng);
    }
  }
  return apply_injection(clean, spec);
}

std::vector<LabeledArea> make_labeled_corpus(const CorpusConfig& config) {
  config.validate();
  std::vector<LabeledArea> out;
  out.reserve(static_cast<std::size_t>(config.n_areas));
  for (int k = 0; k < config.n_areas; ++k) out.push_back(make_labeled_area(config, k));
  return out;
}

nlohmann::json labels_json(const LabeledArea& area) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [id, l] : area.labels) labels[id] = to_string(l);
  nlohmann::json starts = nlohmann::json::object();
  for (const auto& [id, s] : area.spec.start_day) starts[id] = s;
  return {{"area_id", area.dataset.area_id},
          {"labels", labels},
          {"spec",
           {{"targets", area.spec.targets()},
            {"start_day", starts},
            {"alpha", area.spec.alpha},
            {"noise_sigma_N", area.spec.noise_sigma_n},
            {"seed", area.spec.seed}}}};
}

AreaLabels parse_labels_json(const nlohmann::json& j) {
  AreaLabels out;
  out.area_id = j.at("area_id").get<std::string>();
  for (const auto& [id, l] : j.at("labels").items()) {
    out.labels[id] = parse_meter_label(l.get<std::string>());
  }
  const auto& spec = j.at("spec");
  for (const auto& [id, s] : spec.at("start_day").items()) out.spec.start_day[id] = s.get<int>();
  out.spec.alpha = spec.at("alpha").get<double>();
  out.spec.noise_sigma_n = spec.at("noise_sigma_N").get<double>();
  out.spec.seed = spec.at("seed").get<std::uint64_t>();
  return out;
}

}  // namespace meterguard
