#include "acfkit/acf.hpp"

#include <fftw3.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

#include "acfkit/error.hpp"
#include "byte_io.hpp"

namespace acfkit {

namespace fs = std::filesystem;

namespace {

void check_delay(std::size_t frames, std::size_t max_delay) {
  if (max_delay >= frames) {
    throw Error(ErrorCode::DelayTooLarge,
                fmt::format("max delay {} needs more than {} frames", max_delay, frames));
  }
}

void warn_if_not_standardized(const Matrix& values) {
  static std::atomic<bool> warned{false};
  if (warned.load(std::memory_order_relaxed)) return;
  const auto n = static_cast<double>(values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    double sum = 0.0, sq = 0.0;
    for (double v : values.row(r)) {
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    if (std::abs(mean) > 1e-6 || std::abs(var - 1.0) > 1e-6) {
      if (!warned.exchange(true)) {
        spdlog::warn("ACF input channel {} is not standardized (mean {:.3g}, var {:.3g})", r, mean, var);
      }
      return;
    }
  }
}

// Smallest 2^a 3^b 5^c >= n.
std::size_t smooth_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) {
  return ComplexBuffer(reinterpret_cast<fftw_complex*>(fftw_alloc_complex(n)));
}

// Planning is not thread-safe in FFTW, execution with new-array calls is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

PlanPair plans_for(std::size_t size) {
  static std::mutex mutex;
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  auto real = alloc_real(size);
  auto spec = alloc_complex(size / 2 + 1);
  const int n = static_cast<int>(size);
  PlanPair plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real.get(), spec.get(), FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_1d(n, spec.get(), real.get(), FFTW_ESTIMATE);
  cache.emplace(size, plans);
  return plans;
}

}  // namespace

std::string to_string(AcfMethod method) { return method == AcfMethod::naive ? "naive" : "fast"; }

AcfMethod acf_method_from_string(const std::string& text) {
  if (text == "naive") return AcfMethod::naive;
  if (text == "fast") return AcfMethod::fast;
  throw Error(ErrorCode::ConfigError, "unknown ACF method '" + text + "' (expected naive or fast)");
}

AcfMatrix::AcfMatrix(std::size_t channels, std::size_t max_delay, Matrix rows)
    : channels_(channels), max_delay_(max_delay), rows_(std::move(rows)) {
  if (channels_ == 0 || rows_.rows() != channels_ * channels_ || rows_.cols() != max_delay_ + 1) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("ACF matrix must be {}x{}, got {}x{}", channels_ * channels_, max_delay_ + 1,
                            rows_.rows(), rows_.cols()));
  }
  for (double v : rows_.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "ACF matrix contains NaN or Inf");
  }
}

std::string AcfMatrix::row_label(std::size_t row) const {
  auto [i, j] = pair_of(row);
  return fmt::format("{}:{}", i + 1, j + 1);
}

double delayed_correlation_pair(std::span<const double> x, std::span<const double> y, std::size_t d) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("channel lengths {} and {} differ", x.size(), y.size()));
  }
  const std::size_t n = x.size();
  if (d >= n) throw Error(ErrorCode::DelayTooLarge, fmt::format("delay {} with {} frames", d, n));
  long double acc = 0.0L;
  for (std::size_t t = 0; t + d < n; ++t) acc += static_cast<long double>(x[t]) * y[t + d];
  return static_cast<double>(acc / static_cast<long double>(n - d));
}

AcfMatrix acf_matrix_naive(const Matrix& values, const AcfConfig& cfg) {
  const std::size_t m = values.rows();
  const std::size_t n = values.cols();
  const std::size_t dmax = cfg.max_delay_frames;
  check_delay(n, dmax);
  warn_if_not_standardized(values);
  Matrix rows(m * m, dmax + 1);
  for (std::size_t i = 0; i < m; ++i) {
    auto x = values.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      auto y = values.row(j);
      auto out = rows.row(i * m + j);
      for (std::size_t d = 0; d <= dmax; ++d) {
        long double acc = 0.0L;
        for (std::size_t t = 0; t + d < n; ++t) acc += static_cast<long double>(x[t]) * y[t + d];
        out[d] = static_cast<double>(acc / static_cast<long double>(n - d));
      }
    }
  }
  return AcfMatrix(m, dmax, std::move(rows));
}

AcfMatrix acf_matrix_naive(const Segment& segment, const AcfConfig& cfg) {
  return acf_matrix_naive(segment.values, cfg);
}

AcfMatrix acf_matrix_fast(const Matrix& values, const AcfConfig& cfg) {
  const std::size_t m = values.rows();
  const std::size_t n = values.cols();
  const std::size_t dmax = cfg.max_delay_frames;
  check_delay(n, dmax);
  warn_if_not_standardized(values);

  // Padding to >= N + D keeps negative lags from wrapping into [0, D].
  const std::size_t size = smooth_fft_size(n + dmax);
  const std::size_t bins = size / 2 + 1;
  const PlanPair plans = plans_for(size);

  std::vector<ComplexBuffer> spectra;
  spectra.reserve(m);
  auto real = alloc_real(size);
  for (std::size_t i = 0; i < m; ++i) {
    auto x = values.row(i);
    std::copy(x.begin(), x.end(), real.get());
    std::fill(real.get() + n, real.get() + size, 0.0);
    spectra.push_back(alloc_complex(bins));
    fftw_execute_dft_r2c(plans.forward, real.get(), spectra.back().get());
  }

  Matrix rows(m * m, dmax + 1);
  auto product = alloc_complex(bins);
  const double scale = 1.0 / static_cast<double>(size);
  for (std::size_t i = 0; i < m; ++i) {
    const fftw_complex* xi = spectra[i].get();
    for (std::size_t j = 0; j < m; ++j) {
      const fftw_complex* xj = spectra[j].get();
      for (std::size_t k = 0; k < bins; ++k) {
        // conj(Xi) * Xj
        const double re = xi[k][0] * xj[k][0] + xi[k][1] * xj[k][1];
        const double im = xi[k][0] * xj[k][1] - xi[k][1] * xj[k][0];
        product[k][0] = re;
        product[k][1] = im;
      }
      fftw_execute_dft_c2r(plans.inverse, product.get(), real.get());
      auto out = rows.row(i * m + j);
      for (std::size_t d = 0; d <= dmax; ++d) out[d] = real[d] * scale / static_cast<double>(n - d);
    }
  }
  return AcfMatrix(m, dmax, std::move(rows));
}

AcfMatrix acf_matrix_fast(const Segment& segment, const AcfConfig& cfg) {
  return acf_matrix_fast(segment.values, cfg);
}

AcfMatrix compute_acf(const Matrix& values, const AcfConfig& cfg, AcfMethod method) {
  return method == AcfMethod::naive ? acf_matrix_naive(values, cfg) : acf_matrix_fast(values, cfg);
}

Matrix acf_to_model_input(const AcfMatrix& acf) { return acf.rows(); }

AcfMatrix model_input_to_acf(const Matrix& input) {
  const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(input.rows()))));
  if (m * m != input.rows() || input.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{} input channels is not a square count", input.rows()));
  }
  return AcfMatrix(m, input.cols() - 1, input);
}

void write_acf_csv(const AcfMatrix& acf, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "pair");
  for (std::size_t d = 0; d <= acf.max_delay(); ++d) fmt::format_to(it, ",d{}", d);
  buf.push_back('\n');
  for (std::size_t r = 0; r < acf.rows().rows(); ++r) {
    fmt::format_to(it, "{}", acf.row_label(r));
    for (double v : acf.rows().row(r)) fmt::format_to(it, ",{}", v);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void write_acf_binary(const AcfMatrix& acf, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write("ACF1", 4);
  detail::put_le(out, static_cast<std::uint32_t>(acf.channels()));
  detail::put_le(out, static_cast<std::uint32_t>(acf.max_delay()));
  for (double v : acf.rows().data()) detail::put_f64(out, v);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

AcfMatrix read_acf_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "ACF1") throw Error(ErrorCode::ParseError, path.string() + ": bad magic");
  const std::string what = path.string();
  const auto m = detail::get_le<std::uint32_t>(in, what);
  const auto d = detail::get_le<std::uint32_t>(in, what);
  Matrix rows(std::size_t{m} * m, std::size_t{d} + 1);
  for (double& v : rows.data()) v = detail::get_f64(in, what);
  return AcfMatrix(m, d, std::move(rows));
}

}  // namespace acfkit
