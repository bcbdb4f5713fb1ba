#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acfkit/signal.hpp"

namespace acfkit {

// CSV layout: header row of channel names, one row per frame. A leading
// `t_s` column is accepted on read and ignored.
MultiChannelSeries read_series_csv(const std::filesystem::path& path, double frame_rate_hz);
void write_series_csv(const MultiChannelSeries& series, const std::filesystem::path& path);

struct ManifestEntry {
  std::string session_id;
  std::filesystem::path csv_path;  // resolved against the manifest's directory on read
  int hamd = 0;
};

// JSON array of {session_id, csv_path, hamd}.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace acfkit
