#include "acfkit/series_io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "acfkit/error.hpp"

namespace acfkit {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t lead = cell.find_first_not_of(' ');
    cells.push_back(lead == std::string::npos ? std::string{} : cell.substr(lead));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError,
                fmt::format("{}:{}: cannot parse '{}' as a number", path.string(), line_no, text));
  }
  return value;
}

}  // namespace

std::string format_double(double value) { return fmt::format("{}", value); }

MultiChannelSeries read_series_csv(const fs::path& path, double frame_rate_hz) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": missing header row");
  auto header = split_csv_line(line);
  const std::size_t skip = (!header.empty() && header.front() == "t_s") ? 1 : 0;
  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(skip), header.end());
  if (names.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no channel columns");

  std::vector<std::vector<double>> columns(names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, fmt::format("{}:{}: expected {} columns, found {}", path.string(),
                                                     line_no, header.size(), cells.size()));
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
      columns[c].push_back(parse_double(cells[c + skip], path, line_no));
    }
  }
  const std::size_t frames = columns.front().size();
  Matrix values(names.size(), frames);
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::copy(columns[c].begin(), columns[c].end(), values.row(c).begin());
  }
  return MultiChannelSeries(std::move(names), frame_rate_hz, std::move(values));
}

void write_series_csv(const MultiChannelSeries& series, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "t_s");
  for (const auto& name : series.channel_names()) fmt::format_to(std::back_inserter(buf), ",{}", name);
  buf.push_back('\n');
  for (std::size_t t = 0; t < series.frames(); ++t) {
    fmt::format_to(std::back_inserter(buf), "{}", static_cast<double>(t) / series.frame_rate_hz());
    for (std::size_t c = 0; c < series.channels(); ++c) {
      fmt::format_to(std::back_inserter(buf), ",{}", series.values()(c, t));
    }
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  const fs::path base = path.parent_path();
  for (const auto& item : doc) {
    try {
      ManifestEntry e;
      e.session_id = item.at("session_id").get<std::string>();
      fs::path csv = item.at("csv_path").get<std::string>();
      e.csv_path = csv.is_absolute() ? csv : base / csv;
      e.hamd = item.at("hamd").get<int>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": bad manifest entry: " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    doc.push_back({{"session_id", e.session_id}, {"csv_path", e.csv_path.generic_string()}, {"hamd", e.hamd}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace acfkit
