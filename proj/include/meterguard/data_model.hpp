#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "meterguard/date.hpp"

namespace meterguard {

/// Raised for malformed or inconsistent telemetry (missing readings, empty
/// datasets after cleaning, unparseable rows).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One daily reading as ingested. `system_id` is carried but never consumed.
struct UsageRecord {
  std::string region_id;
  std::string meter_id;
  std::string system_id;
  Date date;
  double usage = 0.0;  // kWh

  bool operator==(const UsageRecord&) const = default;
};

using DailySeries = std::map<Date, double>;

/// Meter id reserved for the master meter of an area in usage CSVs.
inline constexpr const char* kMasterMeterId = "MASTER";

/// Daily usage of one residential area: the master meter plus n submeters.
struct UsageDataset {
  std::string area_id;
  DailySeries master;
  std::map<std::string, DailySeries> submeters;

  std::size_t n_submeters() const { return submeters.size(); }
  /// Master dates in increasing order.
  std::vector<Date> dates() const;
  Date first_date() const;
  Date last_date() const;

  bool operator==(const UsageDataset&) const = default;
};

struct CalendarFeatures {
  long com_date = 0;  // days since base date
  std::array<std::uint8_t, 7> weekday_onehot{};   // Mon..Sun
  std::array<std::uint8_t, 12> month_onehot{};    // Jan..Dec
  std::array<std::uint8_t, 3> year_onehot{};      // first_year .. first_year + 2
};

struct ResidualSeries {
  std::vector<Date> dates;
  std::vector<double> values;  // kWh, signed
};

enum class RemovalReason { missing, ssub_overflow };
const char* to_string(RemovalReason reason);

struct RemovedDay {
  Date date;
  RemovalReason reason;
};

struct CleaningResult {
  UsageDataset dataset;
  std::vector<RemovedDay> removed;

  std::vector<Date> removed_dates() const;
};

/// Keeps the first row for every (meter_id, date) key, preserving order.
std::vector<UsageRecord> dedupe_rows(const std::vector<UsageRecord>& rows);

/// Groups records into datasets keyed by region_id. Rows whose meter_id is
/// `master_id` feed the master series. Duplicate keys keep the first reading.
std::map<std::string, UsageDataset> datasets_from_records(
    const std::vector<UsageRecord>& rows, const std::string& master_id = kMasterMeterId);

/// Flattens a dataset back into records (master first, then submeters by id),
/// ordered by date within each meter.
std::vector<UsageRecord> records_from_dataset(const UsageDataset& dataset,
                                              const std::string& master_id = kMasterMeterId);

/// Removes days with any missing reading and days where the submeter sum
/// strictly exceeds the master reading. Throws DataError if nothing survives
/// or if the dataset has no submeters.
CleaningResult drop_invalid_days(const UsageDataset& dataset);

/// One-hot calendar encoding. `first_year` is the year of index 0; the
/// encoding covers first_year .. first_year + 2. Throws std::out_of_range for
/// dates before `base_date` or outside the three-year range.
CalendarFeatures encode_date(Date date, Date base_date, int first_year);

/// E = master(date) - sum_i sub_i(date). Throws DataError on any missing reading.
double residual_error(const UsageDataset& dataset, Date date);

/// residual_error over every master date.
ResidualSeries residual_series(const UsageDataset& dataset);

}  // namespace meterguard
