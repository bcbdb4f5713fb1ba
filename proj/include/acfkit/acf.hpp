#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>

#include "acfkit/matrix.hpp"
#include "acfkit/signal.hpp"

namespace acfkit {

struct AcfConfig {
  // 211 columns, the receptive field of a kernel-15 / dilation-15 branch.
  std::size_t max_delay_frames = 210;
};

enum class AcfMethod { naive, fast };

std::string to_string(AcfMethod method);
AcfMethod acf_method_from_string(const std::string& text);

// Channel-delay correlation matrix: M^2 rows, one per ordered channel pair
// (i outer, j inner, i == j included), D + 1 delay columns.
class AcfMatrix {
 public:
  AcfMatrix(std::size_t channels, std::size_t max_delay, Matrix rows);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t max_delay() const noexcept { return max_delay_; }
  const Matrix& rows() const noexcept { return rows_; }

  std::size_t row_index(std::size_t i, std::size_t j) const noexcept { return i * channels_ + j; }
  std::pair<std::size_t, std::size_t> pair_of(std::size_t row) const noexcept {
    return {row / channels_, row % channels_};
  }
  double at(std::size_t i, std::size_t j, std::size_t d) const noexcept { return rows_(row_index(i, j), d); }

  // "i:j" with 1-based channel numbers.
  std::string row_label(std::size_t row) const;

 private:
  std::size_t channels_;
  std::size_t max_delay_;
  Matrix rows_;
};

/// sum_{t=0}^{N-d-1} x[t] y[t+d] / (N - d). No mean removal: callers
/// standardize first.
double delayed_correlation_pair(std::span<const double> x, std::span<const double> y, std::size_t d);

/// Direct triple loop with extended-precision accumulation. Reference path.
AcfMatrix acf_matrix_naive(const Matrix& values, const AcfConfig& cfg);
AcfMatrix acf_matrix_naive(const Segment& segment, const AcfConfig& cfg);

/// All lags of every pair from zero-padded real FFTs, truncated to [0, D].
AcfMatrix acf_matrix_fast(const Matrix& values, const AcfConfig& cfg);
AcfMatrix acf_matrix_fast(const Segment& segment, const AcfConfig& cfg);

AcfMatrix compute_acf(const Matrix& values, const AcfConfig& cfg, AcfMethod method);

// Each correlation vector becomes one input channel of the segment model.
Matrix acf_to_model_input(const AcfMatrix& acf);
AcfMatrix model_input_to_acf(const Matrix& input);

// Text table: header "pair,d0,...,dD", one "i:j" row per pair.
void write_acf_csv(const AcfMatrix& acf, const std::filesystem::path& path);
// Binary container: "ACF1", uint32 M, uint32 D, then M^2 (D+1) doubles, all little-endian.
void write_acf_binary(const AcfMatrix& acf, const std::filesystem::path& path);
AcfMatrix read_acf_binary(const std::filesystem::path& path);

}  // namespace acfkit
