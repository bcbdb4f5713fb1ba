#include "acfkit/signal.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "acfkit/error.hpp"

namespace acfkit {

namespace {

void require_finite(const Matrix& m) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "series contains NaN or Inf");
  }
}

std::size_t seconds_to_frames(double seconds, double frame_rate_hz) {
  return static_cast<std::size_t>(std::llround(seconds * frame_rate_hz));
}

}  // namespace

MultiChannelSeries::MultiChannelSeries(std::vector<std::string> channel_names, double frame_rate_hz,
                                       Matrix values)
    : names_(std::move(channel_names)), frame_rate_hz_(frame_rate_hz), values_(std::move(values)) {
  if (!(frame_rate_hz_ > 0.0) || !std::isfinite(frame_rate_hz_)) {
    throw Error(ErrorCode::InvalidArgument, "frame rate must be positive");
  }
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw Error(ErrorCode::Empty, "series needs at least one channel and one frame");
  }
  if (names_.size() != values_.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "channel name count " + std::to_string(names_.size()) +
                                              " does not match channel count " +
                                              std::to_string(values_.rows()));
  }
  if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size()) {
    throw Error(ErrorCode::InvalidArgument, "channel names must be distinct");
  }
  require_finite(values_);
}

void SegmentationConfig::validate() const {
  if (!(shift_s > 0.0) || shift_s > window_s) {
    throw Error(ErrorCode::ConfigError, "segmentation requires 0 < shift_s <= window_s");
  }
  if (!(min_s > 0.0) || min_s > window_s) {
    throw Error(ErrorCode::ConfigError, "segmentation requires 0 < min_s <= window_s");
  }
  if (truncate_s && (!(*truncate_s > 0.0) || *truncate_s > min_s)) {
    throw Error(ErrorCode::ConfigError, "truncate_s must be positive and no longer than min_s");
  }
}

std::string to_string(Label label) {
  return label == Label::depressed ? "depressed" : "not_depressed";
}

Label label_from_string(const std::string& text) {
  if (text == "depressed") return Label::depressed;
  if (text == "not_depressed") return Label::not_depressed;
  throw Error(ErrorCode::ParseError, "unknown class label '" + text + "'");
}

Matrix standardize_rows(const Matrix& values) {
  require_finite(values);
  Matrix out(values.rows(), values.cols());
  const auto n = static_cast<double>(values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    auto in = values.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : in) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) {
      throw Error(ErrorCode::ConstantChannel, "channel " + std::to_string(r) + " has zero variance");
    }
    auto o = out.row(r);
    for (std::size_t t = 0; t < in.size(); ++t) o[t] = (in[t] - mean) / sd;
  }
  return out;
}

MultiChannelSeries standardize_channels(const MultiChannelSeries& series) {
  return MultiChannelSeries(series.channel_names(), series.frame_rate_hz(), standardize_rows(series.values()));
}

std::vector<Segment> segment_session(const MultiChannelSeries& series, const SegmentationConfig& cfg,
                                     const std::string& session_id) {
  cfg.validate();
  const double fr = series.frame_rate_hz();
  const std::size_t n = series.frames();
  const std::size_t window = seconds_to_frames(cfg.window_s, fr);
  const std::size_t shift = std::max<std::size_t>(1, seconds_to_frames(cfg.shift_s, fr));
  const std::size_t min_frames = seconds_to_frames(cfg.min_s, fr);

  std::vector<Segment> out;
  if (n < min_frames) return out;
  if (n <= window) {
    out.push_back({session_id, 0, series.values()});
    return out;
  }
  for (std::size_t start = 0; start + window <= n; start += shift) {
    out.push_back({session_id, start, series.values().col_range(start, window)});
  }
  return out;
}

Segment truncate_fixed(const Segment& segment, double truncate_s, double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0) || !(truncate_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "truncation needs positive length and frame rate");
  }
  const auto keep = static_cast<std::size_t>(std::floor(truncate_s * frame_rate_hz + 1e-9));
  if (segment.frames() < keep) {
    throw Error(ErrorCode::TooShort, "segment has " + std::to_string(segment.frames()) + " frames, need " +
                                         std::to_string(keep));
  }
  return {segment.session_id, segment.start_frame, segment.values.col_range(0, keep)};
}

Label hamd_label(int hamd) {
  if (hamd < 0) throw Error(ErrorCode::NegativeScore, "HAMD score " + std::to_string(hamd) + " is negative");
  return hamd > kHamdThreshold ? Label::depressed : Label::not_depressed;
}

void SynthConfig::validate() const {
  if (channels == 0 || frames == 0) throw Error(ErrorCode::ConfigError, "synthetic series needs channels and frames");
  if (coupling_delay < 1) throw Error(ErrorCode::ConfigError, "coupling_delay must be >= 1");
  if (frames <= coupling_delay) throw Error(ErrorCode::ConfigError, "frames must exceed coupling_delay");
  if (!(noise_std > 0.0)) throw Error(ErrorCode::ConfigError, "noise_std must be positive");
  if (!(frame_rate_hz > 0.0)) throw Error(ErrorCode::ConfigError, "frame_rate_hz must be positive");
  if (!coupling.empty()) {
    if (coupling.rows() != channels || coupling.cols() != channels) {
      throw Error(ErrorCode::ConfigError, "coupling must be channels x channels");
    }
    if (spectral_radius(coupling) >= 1.0) {
      throw Error(ErrorCode::UnstableCoupling, "coupling spectral radius is >= 1");
    }
  }
}

double spectral_radius(const Matrix& square) {
  if (square.rows() != square.cols()) throw Error(ErrorCode::ShapeMismatch, "spectral radius needs a square matrix");
  if (square.empty()) return 0.0;
  Eigen::MatrixXd m(square.rows(), square.cols());
  for (std::size_t r = 0; r < square.rows(); ++r)
    for (std::size_t c = 0; c < square.cols(); ++c) m(r, c) = square(r, c);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MultiChannelSeries generate_var_series(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.channels;
  const std::size_t n = cfg.frames;
  const std::size_t lag = cfg.coupling_delay;
  Matrix x(m, n);
  std::mt19937_64 engine(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      double v = noise(engine);
      if (t >= lag && !cfg.coupling.empty()) {
        for (std::size_t j = 0; j < m; ++j) v += cfg.coupling(i, j) * x(j, t - lag);
      }
      x(i, t) = v;
    }
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < m; ++i) names.push_back("ch" + std::to_string(i));
  return MultiChannelSeries(std::move(names), cfg.frame_rate_hz, std::move(x));
}

std::vector<LabeledSession> make_labeled_dataset(const SynthConfig& not_depressed, const SynthConfig& depressed,
                                                 SessionCounts counts,
                                                 std::pair<double, double> duration_range_s) {
  if (not_depressed.channels != depressed.channels || not_depressed.frame_rate_hz != depressed.frame_rate_hz) {
    throw Error(ErrorCode::MismatchedChannels, "class configurations differ in channel count or frame rate");
  }
  auto [lo, hi] = duration_range_s;
  if (!(lo > 0.0) || hi < lo) throw Error(ErrorCode::ConfigError, "invalid duration range");

  const std::uint64_t base = derive_seed(not_depressed.seed, depressed.seed);
  const CounterRng draws(base);
  const std::size_t total = counts.not_depressed + counts.depressed;
  std::vector<LabeledSession> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const bool is_depressed = i >= counts.not_depressed;
    SynthConfig cfg = is_depressed ? depressed : not_depressed;
    const double duration = lo + (hi - lo) * draws.uniform(2 * i);
    cfg.frames = std::max<std::size_t>(cfg.coupling_delay + 1, seconds_to_frames(duration, cfg.frame_rate_hz));
    cfg.seed = derive_seed(base, i);
    const double u = draws.uniform(2 * i + 1);
    const int hamd = is_depressed ? 8 + static_cast<int>(u * 20.0) : static_cast<int>(u * 8.0);

    out.push_back({generate_var_series(cfg), SessionLabel{fmt::format("S{:04d}", i), hamd, hamd_label(hamd)}});
  }
  return out;
}

}  // namespace acfkit
