#include "meterguard/usage_csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace meterguard {

std::string format_double(double value) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw std::runtime_error("failed to format double");
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<UsageRecord> read_usage_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("usage CSV is empty");
  const auto header = split_csv_line(strip_cr(line));
  const std::vector<std::string> expected{"region_id", "meter_id", "system_id", "date", "usage"};
  if (header.size() < expected.size() ||
      !std::equal(expected.begin(), expected.end(), header.begin())) {
    throw DataError("usage CSV header must start with '" + std::string(kUsageCsvHeader) + "'");
  }
  std::vector<UsageRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 5) {
      throw DataError("usage CSV line " + std::to_string(line_no) + ": expected 5 fields");
    }
    UsageRecord r;
    r.region_id = fields[0];
    r.meter_id = fields[1];
    r.system_id = fields[2];
    try {
      r.date = Date::parse(fields[3]);
    } catch (const std::invalid_argument& e) {
      throw DataError("usage CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto& u = fields[4];
    auto [ptr, ec] = std::from_chars(u.data(), u.data() + u.size(), r.usage);
    if (ec != std::errc{} || ptr != u.data() + u.size() || !(r.usage >= 0.0)) {
      throw DataError("usage CSV line " + std::to_string(line_no) + ": invalid usage '" + u + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<UsageRecord> read_usage_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open usage CSV '" + path + "'");
  return read_usage_csv(in);
}

void write_usage_csv(std::ostream& out, const std::vector<UsageRecord>& rows) {
  out << kUsageCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.region_id << ',' << r.meter_id << ',' << r.system_id << ',' << r.date.iso() << ','
        << format_double(r.usage) << '\n';
  }
}

void write_usage_csv_file(const std::string& path, const std::vector<UsageRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_usage_csv(out, rows);
}

nlohmann::json removed_days_json(const std::vector<RemovedDay>& removed) {
  nlohmann::json out = nlohmann::json::array();
  for (const RemovalReason reason : {RemovalReason::missing, RemovalReason::ssub_overflow}) {
    nlohmann::json dates = nlohmann::json::array();
    for (const auto& r : removed) {
      if (r.reason == reason) dates.push_back(r.date.iso());
    }
    out.push_back({{"removed_dates", dates}, {"reason", to_string(reason)}});
  }
  return out;
}

}  // namespace meterguard
