#include "meterguard/cli/artifacts.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "meterguard/usage_csv.hpp"

namespace meterguard::cli {

using nlohmann::json;

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, std::string_view expected_header) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != expected_header) {
    throw DataError("'" + path.string() + "' must start with header '" + std::string(expected_header) + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<fs::path> area_csvs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("data directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && ends_with(name, ".csv") && !ends_with(name, ".reference.csv")) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path reference_path(const fs::path& dir, const std::string& area_id) { return dir / (area_id + ".reference.csv"); }
fs::path labels_path(const fs::path& dir, const std::string& area_id) { return dir / (area_id + ".labels.json"); }
fs::path removed_path(const fs::path& dir, const std::string& area_id) { return dir / (area_id + ".removed.json"); }

std::vector<AreaFiles> load_areas(const std::vector<fs::path>& csvs) {
  std::vector<AreaFiles> out;
  std::map<std::string, fs::path> seen;
  for (const auto& csv : csvs) {
    const fs::path dir = csv.parent_path();
    for (auto& [id, ds] : datasets_from_records(read_usage_csv_file(csv.string()))) {
      if (const auto it = seen.find(id); it != seen.end()) {
        throw DataError("area '" + id + "' appears in both '" + it->second.string() + "' and '" + csv.string() + "'");
      }
      seen.emplace(id, csv);
      AreaFiles a;
      a.area_id = id;
      a.observed = std::move(ds);
      if (const auto ref = reference_path(dir, id); fs::exists(ref)) {
        auto regions = datasets_from_records(read_usage_csv_file(ref.string()));
        const auto r = regions.find(id);
        if (r == regions.end()) throw DataError("'" + ref.string() + "' holds no rows for area '" + id + "'");
        a.reference = std::move(r->second);
      }
      if (const auto lp = labels_path(dir, id); fs::exists(lp)) a.labels = parse_labels_json(read_json(lp));
      out.push_back(std::move(a));
    }
  }
  return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& out_dir, const RunManifest& m) {
  json artifacts = json::object();
  if (fs::is_directory(out_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
      if (entry.is_regular_file() && entry.path().filename() != kManifestName) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      artifacts[fs::relative(f, out_dir).generic_string()] = {{"fnv1a64", fnv1a64_hex(read_text(f))},
                                                              {"bytes", fs::file_size(f)}};
    }
  }
  const json& cfg = m.config;
  json seeds = json::object();
  if (cfg.is_object()) {
    seeds["global"] = cfg.value("seed", json(nullptr));
    for (const char* section : {"simgen", "predictor", "classifier"}) {
      if (cfg.contains(section)) seeds[section] = cfg[section].value("seed", json(nullptr));
    }
  }
  write_json(out_dir / kManifestName, {{"command", m.command},
                                       {"argv", m.argv},
                                       {"config", cfg},
                                       {"seeds", seeds},
                                       {"stages", m.stages},
                                       {"started_at", m.started_at},
                                       {"finished_at", m.finished_at},
                                       {"exit_code", m.exit_code},
                                       {"artifacts", artifacts}});
}

}  // namespace meterguard::cli
