#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "acfkit/acf.hpp"
#include "acfkit/error.hpp"
#include "acfkit/signal.hpp"

using namespace acfkit;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(gen);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

// Plain double loop, independent of the library's accumulation.
double reference_pair(std::span<const double> x, std::span<const double> y, std::size_t d) {
  double s = 0.0;
  for (std::size_t t = 0; t + d < x.size(); ++t) s += x[t] * y[t + d];
  return s / static_cast<double>(x.size() - d);
}

}  // namespace

TEST(DelayedCorrelation, HandSums) {
  const std::vector<double> x{1, -1, 1, -1}, y{1, 1, -1, -1};
  EXPECT_DOUBLE_EQ(delayed_correlation_pair(x, y, 0), 0.0);
  EXPECT_NEAR(delayed_correlation_pair(x, y, 1), 1.0 / 3.0, 1e-15);
}

TEST(DelayedCorrelation, StandardizedZeroLagIsOne) {
  std::mt19937_64 gen(3);
  Matrix z = standardize_rows(random_matrix(1, 333, gen));
  EXPECT_NEAR(delayed_correlation_pair(z.row(0), z.row(0), 0), 1.0, 1e-14);
}

TEST(DelayedCorrelation, Errors) {
  const std::vector<double> x{1, 2, 3}, y{1, 2};
  EXPECT_THROW(delayed_correlation_pair(x, y, 0), Error);
  try {
    delayed_correlation_pair(x, x, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DelayTooLarge);
  }
}

TEST(AcfMatrix, RowOrderingAndShape) {
  std::mt19937_64 gen(5);
  Matrix x = standardize_rows(random_matrix(2, 20, gen));
  auto acf = acf_matrix_naive(x, {1});
  EXPECT_EQ(acf.rows().rows(), 4u);
  EXPECT_EQ(acf.rows().cols(), 2u);
  const std::vector<std::pair<std::size_t, std::size_t>> order{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(acf.pair_of(r), order[r]);
    EXPECT_EQ(acf.row_index(order[r].first, order[r].second), r);
    for (std::size_t d = 0; d <= 1; ++d)
      EXPECT_NEAR(acf.rows()(r, d), reference_pair(x.row(order[r].first), x.row(order[r].second), d), 1e-14);
  }
  EXPECT_EQ(acf.row_label(1), "1:2");
  EXPECT_NEAR(acf.at(0, 0, 0), 1.0, 1e-14);
  EXPECT_NEAR(acf.at(1, 1, 0), 1.0, 1e-14);
}

TEST(AcfMatrix, NaiveMatchesEntrywiseRecomputation) {
  std::mt19937_64 gen(8);
  Matrix x = standardize_rows(random_matrix(3, 50, gen));
  auto acf = acf_matrix_naive(x, {10});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t d = 0; d <= 10; ++d)
        EXPECT_NEAR(acf.at(i, j, d), delayed_correlation_pair(x.row(i), x.row(j), d), 1e-15);
}

TEST(AcfMatrix, DelayMustBeBelowLength) {
  Matrix x(2, 10, 1.0);
  EXPECT_THROW(acf_matrix_naive(x, {10}), Error);
  EXPECT_THROW(acf_matrix_fast(x, {10}), Error);
}

TEST(AcfMatrix, FastImpulseResponse) {
  const std::size_t n = 64, d = 5;
  Matrix x(2, n);
  x(0, 0) = 1.0;
  x(1, d) = 1.0;
  auto acf = acf_matrix_fast(x, {12});
  for (std::size_t k = 0; k <= 12; ++k) {
    const double expected = k == d ? 1.0 / static_cast<double>(n - d) : 0.0;
    EXPECT_NEAR(acf.at(0, 1, k), expected, 1e-12) << k;
  }
}

TEST(AcfMatrix, FastMatchesNaiveOnRandomCases) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + gen() % 8;
    const std::size_t n = 2 + gen() % 511;
    const std::size_t d = gen() % std::min<std::size_t>(65, n);
    Matrix x = random_matrix(m, n, gen);
    EXPECT_LE(max_abs_diff(acf_matrix_fast(x, {d}).rows(), acf_matrix_naive(x, {d}).rows()), 1e-9)
        << m << " " << n << " " << d;
  }
}

TEST(AcfProperties, ZeroLagSymmetry) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_matrix(4, 40 + trial, gen);
    auto acf = acf_matrix_naive(x, {3});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(acf.at(i, j, 0), acf.at(j, i, 0));
  }
}

TEST(AcfProperties, TimeReversalDuality) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + gen() % 100;
    Matrix x = random_matrix(2, n, gen);
    std::vector<double> xr(x.row(0).rbegin(), x.row(0).rend()), yr(x.row(1).rbegin(), x.row(1).rend());
    for (std::size_t d = 0; d < std::min<std::size_t>(n, 10); ++d) {
      // sum_t x[t] y[t+d] over reversed inputs: the roles of the two channels swap
      EXPECT_NEAR(delayed_correlation_pair(x.row(0), x.row(1), d), delayed_correlation_pair(yr, xr, d), 1e-12);
    }
  }
}

TEST(AcfProperties, CauchySchwarzBound) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + gen() % 200;
    Matrix x = random_matrix(2, n, gen);
    double sxx = 0, syy = 0;
    for (std::size_t t = 0; t < n; ++t) sxx += x(0, t) * x(0, t), syy += x(1, t) * x(1, t);
    for (std::size_t d = 0; d < n; d += 1 + n / 10) {
      const double raw = delayed_correlation_pair(x.row(0), x.row(1), d) * static_cast<double>(n - d);
      EXPECT_LE(std::abs(raw), std::sqrt(sxx) * std::sqrt(syy) + 1e-9);
    }
  }
}

TEST(AcfProperties, ShiftCovarianceOnImpulses) {
  const std::size_t n = 80;
  for (std::size_t shift = 0; shift < 20; ++shift) {
    std::vector<double> x(n, 0.0), y(n, 0.0);
    x[3] = 1.0;
    y[3 + shift] = 1.0;  // y delayed by `shift` zeros at its front
    std::size_t peak = 0;
    double best = -1;
    for (std::size_t d = 0; d < 40; ++d) {
      const double raw = delayed_correlation_pair(x, y, d) * static_cast<double>(n - d);
      if (raw > best) best = raw, peak = d;
    }
    EXPECT_EQ(peak, shift);
  }
}

TEST(ModelInput, ReshapeAndRoundTrip) {
  std::mt19937_64 gen(12);
  auto acf = acf_matrix_naive(random_matrix(2, 30, gen), {7});
  Matrix in = acf_to_model_input(acf);
  EXPECT_EQ(in.rows(), 4u);
  EXPECT_EQ(in.cols(), 8u);
  auto back = model_input_to_acf(in);
  EXPECT_EQ(back.channels(), 2u);
  EXPECT_EQ(back.rows(), acf.rows());
  Matrix seven = random_matrix(7, 300, gen);
  EXPECT_EQ(acf_to_model_input(acf_matrix_fast(seven, {20})).rows(), 49u);
  EXPECT_THROW(model_input_to_acf(Matrix(3, 4)), Error);
}

TEST(AcfFiles, BinaryRoundTripAndCsvLayout) {
  std::mt19937_64 gen(13);
  auto acf = acf_matrix_naive(random_matrix(2, 30, gen), {3});
  const auto dir = std::filesystem::temp_directory_path();
  write_acf_binary(acf, dir / "acfkit_t.acf");
  EXPECT_EQ(read_acf_binary(dir / "acfkit_t.acf").rows(), acf.rows());
  {
    std::ifstream in(dir / "acfkit_t.acf", std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "ACF1");
    EXPECT_EQ(std::filesystem::file_size(dir / "acfkit_t.acf"), 4u + 4 + 4 + 4 * 4 * 8);
  }
  write_acf_csv(acf, dir / "acfkit_t.csv");
  std::ifstream csv(dir / "acfkit_t.csv");
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  EXPECT_EQ(header, "pair,d0,d1,d2,d3");
  EXPECT_EQ(first.substr(0, 4), "1:1,");
}

TEST(AcfFiles, TruncatedBinaryRejected) {
  const auto path = std::filesystem::temp_directory_path() / "acfkit_bad.acf";
  std::ofstream(path, std::ios::binary) << "ACF1\x02";
  EXPECT_THROW(read_acf_binary(path), Error);
}
