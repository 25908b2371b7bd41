#include "meterguard/data_model.hpp"

#include <set>
#include <utility>

namespace meterguard {

std::vector<Date> UsageDataset::dates() const {
  std::vector<Date> out;
  out.reserve(master.size());
  for (const auto& [d, _] : master) out.push_back(d);
  return out;
}

Date UsageDataset::first_date() const {
  if (master.empty()) throw DataError("dataset '" + area_id + "' has no master readings");
  return master.begin()->first;
}

Date UsageDataset::last_date() const {
  if (master.empty()) throw DataError("dataset '" + area_id + "' has no master readings");
  return master.rbegin()->first;
}

const char* to_string(RemovalReason reason) {
  switch (reason) {
    case RemovalReason::missing: return "missing";
    case RemovalReason::ssub_overflow: return "ssub_overflow";
  }
  return "unknown";
}

std::vector<Date> CleaningResult::removed_dates() const {
  std::vector<Date> out;
  out.reserve(removed.size());
  for (const auto& r : removed) out.push_back(r.date);
  return out;
}

std::vector<UsageRecord> dedupe_rows(const std::vector<UsageRecord>& rows) {
  std::set<std::pair<std::string, Date>> seen;
  std::vector<UsageRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (seen.emplace(row.meter_id, row.date).second) out.push_back(row);
  }
  return out;
}

std::map<std::string, UsageDataset> datasets_from_records(const std::vector<UsageRecord>& rows,
                                                          const std::string& master_id) {
  std::map<std::string, UsageDataset> out;
  for (const auto& row : rows) {
    if (!(row.usage >= 0.0)) {
      throw DataError("negative or non-numeric usage for meter '" + row.meter_id + "' on " +
                      row.date.iso());
    }
    auto& ds = out[row.region_id];
    ds.area_id = row.region_id;
    auto& series = row.meter_id == master_id ? ds.master : ds.submeters[row.meter_id];
    series.emplace(row.date, row.usage);  // first reading wins
  }
  return out;
}

std::vector<UsageRecord> records_from_dataset(const UsageDataset& ds, const std::string& master_id) {
  std::vector<UsageRecord> out;
  auto emit = [&](const std::string& meter, const DailySeries& series) {
    for (const auto& [d, v] : series) out.push_back({ds.area_id, meter, meter, d, v});
  };
  emit(master_id, ds.master);
  for (const auto& [id, series] : ds.submeters) emit(id, series);
  return out;
}

CleaningResult drop_invalid_days(const UsageDataset& ds) {
  if (ds.submeters.empty()) throw DataError("dataset '" + ds.area_id + "' has no submeters");

  std::set<Date> all_dates;
  for (const auto& [d, _] : ds.master) all_dates.insert(d);
  for (const auto& [_, series] : ds.submeters) {
    for (const auto& [d, __] : series) all_dates.insert(d);
  }

  CleaningResult result;
  result.dataset.area_id = ds.area_id;
  for (const auto& [id, _] : ds.submeters) result.dataset.submeters[id];

  for (const Date d : all_dates) {
    auto m = ds.master.find(d);
    bool complete = m != ds.master.end();
    double ssub = 0.0;
    for (const auto& [_, series] : ds.submeters) {
      if (!complete) break;
      auto it = series.find(d);
      if (it == series.end()) {
        complete = false;
      } else {
        ssub += it->second;
      }
    }
    if (!complete) {
      result.removed.push_back({d, RemovalReason::missing});
      continue;
    }
    if (ssub > m->second) {
      result.removed.push_back({d, RemovalReason::ssub_overflow});
      continue;
    }
    result.dataset.master.emplace(d, m->second);
    for (const auto& [id, series] : ds.submeters) {
      result.dataset.submeters[id].emplace(d, series.at(d));
    }
  }
  if (result.dataset.master.empty()) {
    throw DataError("no valid days remain in dataset '" + ds.area_id + "' after cleaning");
  }
  return result;
}

CalendarFeatures encode_date(Date date, Date base_date, int first_year) {
  if (date < base_date) {
    throw std::out_of_range("date " + date.iso() + " precedes base date " + base_date.iso());
  }
  const int year_index = date.year() - first_year;
  if (year_index < 0 || year_index > 2) {
    throw std::out_of_range("year " + std::to_string(date.year()) + " outside encoded range " +
                            std::to_string(first_year) + ".." + std::to_string(first_year + 2));
  }
  CalendarFeatures f;
  f.com_date = date - base_date;
  f.weekday_onehot[date.weekday_index()] = 1;
  f.month_onehot[date.month() - 1] = 1;
  f.year_onehot[static_cast<std::size_t>(year_index)] = 1;
  return f;
}

double residual_error(const UsageDataset& ds, Date date) {
  auto m = ds.master.find(date);
  if (m == ds.master.end()) {
    throw DataError("missing master reading on " + date.iso() + " in '" + ds.area_id + "'");
  }
  double ssub = 0.0;
  for (const auto& [id, series] : ds.submeters) {
    auto it = series.find(date);
    if (it == series.end()) {
      throw DataError("missing reading for submeter '" + id + "' on " + date.iso());
    }
    ssub += it->second;
  }
  return m->second - ssub;
}

ResidualSeries residual_series(const UsageDataset& ds) {
  ResidualSeries out;
  out.dates = ds.dates();
  out.values.reserve(out.dates.size());
  for (const Date d : out.dates) out.values.push_back(residual_error(ds, d));
  return out;
}

}  // namespace meterguard
