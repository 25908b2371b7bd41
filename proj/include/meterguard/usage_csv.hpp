#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/data_model.hpp"

namespace meterguard {

inline constexpr const char* kUsageCsvHeader = "region_id,meter_id,system_id,date,usage";

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double value);

/// Reads the usage CSV schema. Extra columns after `usage` are ignored so wider
/// telemetry exports can be ingested; rows are returned in file order.
std::vector<UsageRecord> read_usage_csv(std::istream& in);
std::vector<UsageRecord> read_usage_csv_file(const std::string& path);

void write_usage_csv(std::ostream& out, const std::vector<UsageRecord>& rows);
void write_usage_csv_file(const std::string& path, const std::vector<UsageRecord>& rows);

/// `[{"removed_dates": [...], "reason": "missing"}, {..., "reason": "ssub_overflow"}]`
nlohmann::json removed_days_json(const std::vector<RemovedDay>& removed);

}  // namespace meterguard
