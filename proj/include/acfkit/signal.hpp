#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acfkit/matrix.hpp"
#include "acfkit/rng.hpp"

namespace acfkit {

// An M-channel, N-frame real signal sampled at a fixed frame rate.
// Construction validates shape, unique channel names and finiteness.
class MultiChannelSeries {
 public:
  MultiChannelSeries(std::vector<std::string> channel_names, double frame_rate_hz, Matrix values);

  std::size_t channels() const noexcept { return values_.rows(); }
  std::size_t frames() const noexcept { return values_.cols(); }
  double frame_rate_hz() const noexcept { return frame_rate_hz_; }
  double duration_s() const noexcept { return static_cast<double>(frames()) / frame_rate_hz_; }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  const Matrix& values() const noexcept { return values_; }
  std::span<const double> channel(std::size_t i) const noexcept { return values_.row(i); }

 private:
  std::vector<std::string> names_;
  double frame_rate_hz_;
  Matrix values_;
};

struct SegmentationConfig {
  double window_s = 20.0;
  double shift_s = 5.0;
  double min_s = 10.0;
  std::optional<double> truncate_s;

  void validate() const;
};

struct Segment {
  std::string session_id;
  std::size_t start_frame = 0;
  Matrix values;  // channels x frames

  std::size_t channels() const noexcept { return values.rows(); }
  std::size_t frames() const noexcept { return values.cols(); }
};

// Class index order matches the D/ND column order used in reports.
enum class Label : int { depressed = 0, not_depressed = 1 };

inline constexpr int kHamdThreshold = 7;

struct SessionLabel {
  std::string session_id;
  int hamd = 0;
  Label label = Label::not_depressed;
};

std::string to_string(Label label);
Label label_from_string(const std::string& text);

/// Per-channel z-scoring with the population (1/N) standard deviation.
/// Throws ConstantChannel for zero-variance channels and NonFinite on NaN/Inf.
MultiChannelSeries standardize_channels(const MultiChannelSeries& series);
Matrix standardize_rows(const Matrix& values);

/// Windows a recording. Recordings shorter than min_s yield nothing, recordings
/// no longer than window_s are kept whole, longer ones are cut into full
/// windows every shift_s and the trailing remainder is dropped.
std::vector<Segment> segment_session(const MultiChannelSeries& series, const SegmentationConfig& cfg,
                                     const std::string& session_id = {});

/// First floor(truncate_s * frame_rate_hz) frames. Throws TooShort.
Segment truncate_fixed(const Segment& segment, double truncate_s, double frame_rate_hz);

/// depressed iff hamd > 7. Throws NegativeScore.
Label hamd_label(int hamd);

struct SynthConfig {
  std::size_t channels = 3;
  std::size_t frames = 1000;
  Matrix coupling;  // channels x channels; empty means zero
  std::size_t coupling_delay = 1;
  double noise_std = 1.0;
  std::uint64_t seed = kDefaultSeed;
  double frame_rate_hz = 100.0;

  void validate() const;
};

double spectral_radius(const Matrix& square);

/// x[t] = A x[t - delay] + e[t] with iid N(0, noise_std^2) innovations; the
/// first `delay` frames are pure noise. Bit-reproducible for a given seed.
MultiChannelSeries generate_var_series(const SynthConfig& cfg);

struct LabeledSession {
  MultiChannelSeries series;
  SessionLabel label;
};

struct SessionCounts {
  std::size_t not_depressed = 10;
  std::size_t depressed = 10;
};

/// Synthetic labeled sessions. The not-depressed sessions come first, each
/// with its own derived seed, a uniform duration in `duration_range_s` and a
/// HAMD score consistent with its class (0..7 or 8..27).
std::vector<LabeledSession> make_labeled_dataset(const SynthConfig& not_depressed, const SynthConfig& depressed,
                                                 SessionCounts counts,
                                                 std::pair<double, double> duration_range_s);

}  // namespace acfkit
