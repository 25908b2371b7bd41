#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "meterguard/data_model.hpp"
#include "meterguard/simgen.hpp"

namespace meterguard::cli {

namespace fs = std::filesystem;

/// 64-bit FNV-1a, lower-case hex.
std::string fnv1a64_hex(std::string_view bytes);

std::string read_text(const fs::path& path);
/// Creates parent directories; throws std::runtime_error when unwritable.
void write_text(const fs::path& path, std::string_view contents);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// Comma-separated rows after the header line; throws when the header differs.
std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, std::string_view expected_header);

/// Area CSVs of a data directory in name order (reference series excluded).
std::vector<fs::path> area_csvs(const fs::path& dir);

fs::path reference_path(const fs::path& dir, const std::string& area_id);
fs::path labels_path(const fs::path& dir, const std::string& area_id);
fs::path removed_path(const fs::path& dir, const std::string& area_id);

/// One area as found on disk: `<id>.csv`, optional `<id>.reference.csv`
/// (pre-injection series) and `<id>.labels.json`.
struct AreaFiles {
  std::string area_id;
  UsageDataset observed;
  std::optional<UsageDataset> reference;
  std::optional<AreaLabels> labels;
};

/// Loads every region of every given CSV; companions are looked up next to
/// the CSV that holds the region. Throws DataError on duplicate area ids.
std::vector<AreaFiles> load_areas(const std::vector<fs::path>& csvs);

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

std::string utc_timestamp();

/// Provenance record: config snapshot, seeds and FNV-1a hashes of every file
/// under `out_dir` except the manifest itself. Timestamps live only here.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::string started_at;
  std::string finished_at;
  int exit_code = 0;
  std::vector<std::string> stages;
};

inline constexpr const char* kManifestName = "run_manifest.json";

void write_manifest(const fs::path& out_dir, const RunManifest& manifest);

}  // namespace meterguard::cli
