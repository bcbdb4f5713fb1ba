#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "acfkit/error.hpp"
#include "acfkit/pipeline.hpp"

namespace acfkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool dashed = false;
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

// Minimal line chart: fixed 480x400 canvas, linear axes with five ticks each.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::pair<double, double> x_range, std::pair<double, double> y_range,
                       const std::vector<Series>& series) {
  constexpr double W = 480, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + pw * (x - x_range.first) / (x_range.second - x_range.first); };
  auto sy = [&](double y) { return top + ph * (1.0 - (y - y_range.first) / (y_range.second - y_range.first)); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", W / 2, title);
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left,
                     top, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_range.first + (x_range.second - x_range.first) * i / 4.0;
    const double fy = y_range.first + (y_range.second - y_range.first) * i / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:g}</text>\n", sx(fx), top + ph + 16,
                       fx);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:g}</text>\n", left - 6, sy(fy) + 4, fy);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, H - 12, x_label);
  svg += fmt::format("<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
                     top + ph / 2, top + ph / 2, y_label);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : series[s].points) pts += fmt::format("{:.2f},{:.2f} ", sx(x), sy(y));
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} points=\"{}\"/>\n", colour,
                       series[s].dashed ? " stroke-dasharray=\"4 3\"" : "", pts);
    const double ly = top + 14 + 16 * static_cast<double>(s);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"/>", left + pw - 130, ly,
                       left + pw - 110, ly, colour);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw - 104, ly + 4, series[s].name);
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

std::vector<std::pair<double, double>> roc_points(const json& metrics) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : metrics.at("roc")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return pts;
}

}  // namespace

std::vector<fs::path> cmd_plot(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + out_dir.string());
  std::vector<fs::path> written;
  for (const auto& input : inputs) {
    const json doc = read_json_file(input);
    const std::string stem = input.stem().string();
    try {
      if (doc.contains("segment") && doc.contains("session")) {
        std::vector<Series> series;
        for (const char* level : {"segment", "session"}) {
          series.push_back({fmt::format("{} (AUC {:.3f})", level, doc.at(level).at("auc_roc").get<double>()),
                            roc_points(doc.at(level))});
        }
        series.push_back({"chance", {{0.0, 0.0}, {1.0, 1.0}}, true});
        const fs::path path = out_dir / (stem + "_roc.svg");
        write_text(render_svg("ROC", "false positive rate", "true positive rate", {0, 1}, {0, 1}, series), path);
        written.push_back(path);
      } else if (doc.contains("curves")) {
        std::vector<Series> series;
        double max_n = 1.0, min_recall = 1.0;
        for (const auto& c : doc.at("curves")) {
          Series s{fmt::format("p0 = {:g}", c.at("p0").get<double>()), {}};
          const auto ns = c.at("n").get<std::vector<double>>();
          const auto rs = c.at("recall").get<std::vector<double>>();
          for (std::size_t i = 0; i < ns.size() && i < rs.size(); ++i) {
            s.points.emplace_back(ns[i], rs[i]);
            max_n = std::max(max_n, ns[i]);
            min_recall = std::min(min_recall, rs[i]);
          }
          series.push_back(std::move(s));
        }
        const double y_low = std::floor(min_recall * 10.0) / 10.0;
        const fs::path path = out_dir / (stem + "_recall_vs_n.svg");
        write_text(render_svg("Session recall under plurality vote", "segments per session (N)", "session recall",
                              {0, max_n + 1}, {y_low, 1.0}, series),
                   path);
        written.push_back(path);
      } else {
        throw Error(ErrorCode::InvalidArgument,
                    input.string() + ": expected an eval report or a vote check report");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, input.string() + ": " + e.what());
    }
  }
  return written;
}

}  // namespace acfkit
