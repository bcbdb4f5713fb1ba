#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "acfkit/error.hpp"
#include "acfkit/segnet.hpp"

using namespace acfkit;

namespace {

Matrix random_input(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(gen);
  return m;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dilations = {1, 3};
  cfg.parallel_kernel = 3;
  cfg.parallel_filters = 2;
  cfg.seq_kernels = {3, 3};
  cfg.seq_filters = {2, 2};
  cfg.dense_units = {4, 3};
  return cfg;
}

// Two Gaussian blobs in input space, one session per 4 samples.
std::vector<TrainingSample> blobs(std::size_t per_class, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    Matrix m = random_input(rows, cols, gen, 0.5);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) m(r, c) += (label == 0 ? 1.0 : -1.0) * std::sin(0.3 * (c + r));
    out.push_back({m, label, "s" + std::to_string(label) + "_" + std::to_string(i / 8)});
  }
  return out;
}

double total_loss(const ModelParams& p, const std::vector<TrainingSample>& set, const std::array<double, 2>& w) {
  return evaluate_batch(p, set, w).mean_loss + l2_penalty(p);
}

}  // namespace

TEST(DilatedConv, HandExample) {
  Matrix in(1, 4, {1, 2, 3, 4});
  const std::vector<double> w{1, 1}, b{0};
  Matrix out = dilated_conv1d(in, w, b, 2, 2);
  EXPECT_EQ(out, Matrix(1, 4, {1, 2, 4, 6}));
}

TEST(DilatedConv, ZeroWeightsGiveBiasAndIdentityTap) {
  std::mt19937_64 gen(1);
  Matrix in = random_input(3, 10, gen);
  const std::vector<double> zeros(2 * 3 * 4, 0.0), bias{0.5, -1.5};
  Matrix out = dilated_conv1d(in, zeros, bias, 4, 3);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(out(0, t), 0.5);
    EXPECT_EQ(out(1, t), -1.5);
  }

  Matrix single = random_input(1, 12, gen);
  for (std::size_t dil : {1u, 2u, 7u}) {
    Matrix o = dilated_conv1d(single, std::vector<double>{1.0}, std::vector<double>{0.25}, 1, dil);
    for (std::size_t t = 0; t < 12; ++t) EXPECT_DOUBLE_EQ(o(0, t), single(0, t) + 0.25);
  }
}

TEST(DilatedConv, ShapeMismatch) {
  Matrix in(2, 5);
  EXPECT_THROW(dilated_conv1d(in, std::vector<double>(3), std::vector<double>{0}, 2, 1), Error);
}

TEST(Forward, ZeroParamsGiveUniform) {
  ModelParams p(ModelConfig{}, 4, 32);
  std::fill(p.values().begin(), p.values().end(), 0.0);
  std::mt19937_64 gen(2);
  auto probs = model_forward(p, random_input(4, 32, gen));
  EXPECT_DOUBLE_EQ(probs[0], 0.5);
  EXPECT_DOUBLE_EQ(probs[1], 0.5);
}

TEST(Forward, ProbabilitiesNormalizedAndDeterministic) {
  std::mt19937_64 gen(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelParams p(ModelConfig{}, 4, 32, seed);
    Matrix x = random_input(4, 32, gen, 1.0 + static_cast<double>(seed));
    auto a = model_forward(p, x);
    EXPECT_NEAR(a[0] + a[1], 1.0, 1e-9);
    EXPECT_GT(a[0], 0.0);
    EXPECT_LT(a[0], 1.0);
    EXPECT_EQ(a, model_forward(p, x));
  }
}

TEST(Forward, ShapeMismatch) {
  ModelParams p(ModelConfig{}, 4, 32);
  EXPECT_THROW(model_forward(p, Matrix(9, 32)), Error);
  EXPECT_THROW(model_forward(p, Matrix(4, 31)), Error);
}

TEST(Embedding, DimensionZeroInputAndPurity) {
  ModelConfig cfg;
  ModelParams p(cfg, 4, 32);
  std::mt19937_64 gen(4);
  Matrix x = random_input(4, 32, gen);
  auto e = embed_segment(p, x);
  EXPECT_EQ(e.size(), cfg.seq_filters.back() * 32);
  EXPECT_EQ(p.layout().embedding_size(), e.size());
  EXPECT_EQ(e, embed_segment(p, x));
  auto z = embed_segment(p, Matrix(4, 32));
  for (double v : z) EXPECT_EQ(v, 0.0);
}

TEST(Loss, Examples) {
  const std::vector<double> uniform{0.5, 0.5}, perfect{1.0, 0.0}, zero{0.0, 1.0};
  EXPECT_NEAR(weighted_cross_entropy(uniform, 0, 1.0).loss, 0.6931471805599453, 1e-15);
  EXPECT_EQ(weighted_cross_entropy(perfect, 0, 1.0).loss, 0.0);
  const std::vector<double> p{0.3, 0.7};
  EXPECT_EQ(weighted_cross_entropy(p, 1, 2.0).loss, 2.0 * weighted_cross_entropy(p, 1, 1.0).loss);
  auto clamped = weighted_cross_entropy(zero, 0, 1.0);
  EXPECT_TRUE(clamped.clamped);
  EXPECT_NEAR(clamped.loss, -std::log(1e-12), 1e-9);
}

TEST(Backward, ZeroGradientAtCertainPrediction) {
  ModelConfig cfg = tiny_config();
  cfg.l2_lambda = 0.0;
  ModelParams p(cfg, 4, 16, 5);
  const auto& out = p.layout().output;
  std::fill_n(p.values().begin() + out.weight_offset, out.units * out.inputs, 0.0);
  p.values()[out.bias_offset + 1] = 1000.0;
  std::mt19937_64 gen(5);
  Matrix x = random_input(4, 16, gen);
  ASSERT_EQ(model_forward(p, x)[1], 1.0);
  auto g = model_backward(p, x, 1, 1.0);
  for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ClassWeightScalesDataTermOnly) {
  ModelConfig cfg = tiny_config();
  cfg.l2_lambda = 0.05;
  ModelParams p(cfg, 4, 16, 6);
  std::mt19937_64 gen(6);
  Matrix x = random_input(4, 16, gen);
  auto g1 = model_backward(p, x, 0, 1.0);
  auto g2 = model_backward(p, x, 0, 2.0);
  std::vector<double> l2(p.size(), 0.0);
  for (const auto& l : p.layout().hidden)
    for (std::size_t i = 0; i < l.units * l.inputs; ++i)
      l2[l.weight_offset + i] = 2.0 * cfg.l2_lambda * p.values()[l.weight_offset + i];
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(g2.values[i] - l2[i], 2.0 * (g1.values[i] - l2[i]), 1e-12 * (1 + std::abs(g2.values[i])));
  }
}

// Central differences on every parameter, for several seeds and net sizes.
class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  std::vector<ModelConfig> sizes(3);
  sizes[0] = tiny_config();
  sizes[1] = tiny_config();
  sizes[1].dilations = {1, 3, 7, 15};
  sizes[1].parallel_kernel = 5;
  sizes[1].parallel_filters = 3;
  sizes[1].dense_units = {6};
  sizes[2] = ModelConfig{};
  sizes[2].parallel_filters = 4;
  sizes[2].seq_filters = {4, 4};
  const int seed = GetParam();
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    ModelParams p(sizes[s], 4, 32, static_cast<std::uint64_t>(seed) * 31 + s);
    std::mt19937_64 gen(seed + 100 * s);
    // evaluate at a point where every rectifier is at least 1e-3 from its kink
    Matrix x = random_input(4, 32, gen);
    for (int redraw = 0; activation_margin(p, x) < 1e-3; ++redraw) {
      ASSERT_LT(redraw, 200);
      x = random_input(4, 32, gen);
    }
    const int label = seed % 2;
    const double weight = 0.7 + 0.3 * seed;
    const auto analytic = model_backward(p, x, label, weight);
    const double eps = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ModelParams plus = p, minus = p;
      plus.values()[i] += eps;
      minus.values()[i] -= eps;
      const double lp = model_backward(plus, x, label, weight).loss;
      const double lm = model_backward(minus, x, label, weight).loss;
      const double numeric = (lp - lm) / (2 * eps);
      const double rel = std::abs(analytic.values[i] - numeric) / std::max(1.0, std::abs(analytic.values[i]));
      worst = std::max(worst, rel);
    }
    EXPECT_LT(worst, 1e-4) << "net size " << s << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Values(1, 2, 3, 4, 5));

TEST(ClassWeights, InverseFrequencyMeanOne) {
  const std::vector<int> labels{0, 0, 0, 1};
  auto w = auto_class_weights(labels);
  EXPECT_NEAR(w[0], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(w[1], 2.0, 1e-15);
  EXPECT_NEAR((3 * w[0] + w[1]) / 4.0, 1.0, 1e-15);
  try {
    auto_class_weights(std::vector<int>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassDataset);
  }
}

TEST(SplitBySession, NeverSplitsASession) {
  auto data = blobs(40, 2, 8, 7);
  auto [tr, va] = split_by_session(data, 0.2, 1729);
  EXPECT_EQ(tr.size() + va.size(), data.size());
  std::set<std::string> train_sessions, val_sessions;
  std::set<int> val_labels;
  for (auto i : tr) train_sessions.insert(data[i].session_id);
  for (auto i : va) val_sessions.insert(data[i].session_id), val_labels.insert(data[i].label);
  for (const auto& s : val_sessions) EXPECT_FALSE(train_sessions.count(s)) << s;
  EXPECT_EQ(val_labels.size(), 2u);
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
  auto data = blobs(32, 4, 16, 8);
  auto val = blobs(8, 4, 16, 9);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.batch_size = 16;
  tc.max_epochs = 100;
  tc.patience_epochs = 100;
  auto result = train(tiny_config(), tc, data, val);
  auto eval = evaluate_batch(result.params, data, {1, 1});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += (eval.probs[i][0] >= 0.5 ? 0 : 1) == data[i].label;
  EXPECT_GE(static_cast<double>(correct) / data.size(), 0.95);
}

TEST(Train, FirstEpochLossNearLn2WithSmallInit) {
  auto data = blobs(16, 4, 16, 10);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.patience_epochs = 1;
  tc.init_scale = 1e-3;
  auto result = train(tiny_config(), tc, data, data);
  ASSERT_EQ(result.log.size(), 1u);
  EXPECT_NEAR(result.log[0].train_loss, std::log(2.0), 0.2);
}

TEST(Train, FirstAdamStepLowersLossAtTinyRate) {
  auto data = blobs(8, 4, 16, 11);
  TrainConfig tc;
  tc.learning_rate = 1e-6;
  tc.batch_size = data.size();
  tc.max_epochs = 1;
  tc.patience_epochs = 1;
  const std::array<double, 2> w{1.0, 1.0};
  tc.class_weights = w;
  ModelParams before(tiny_config(), 4, 16, tc.seed);
  auto result = train(tiny_config(), tc, data, data);
  EXPECT_LT(total_loss(result.params, data, w), total_loss(before, data, w));
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
  auto data = blobs(12, 4, 16, 12);
  auto val = blobs(4, 4, 16, 13);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 10;
  tc.max_epochs = 5;
  tc.patience_epochs = 5;
  auto a = train(tiny_config(), tc, data, val);
  tc.threads = 3;
  auto b = train(tiny_config(), tc, data, val);
  EXPECT_EQ(a.params.values(), b.params.values());
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
  auto data = blobs(12, 4, 16, 14);
  // Validation labels flipped: validation loss rises as training fits.
  auto val = blobs(4, 4, 16, 15);
  for (auto& s : val) s.label = 1 - s.label;
  TrainConfig tc;
  tc.learning_rate = 5e-3;
  tc.batch_size = 8;
  tc.max_epochs = 60;
  tc.patience_epochs = 5;
  auto r = train(tiny_config(), tc, data, val);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.log.size(), 60u);
  EXPECT_EQ(r.log.size(), r.best_epoch + tc.patience_epochs);
  double best = 1e300;
  std::size_t best_epoch = 0;
  for (const auto& e : r.log)
    if (e.val_loss < best) best = e.val_loss, best_epoch = e.epoch;
  EXPECT_EQ(best_epoch, r.best_epoch);
  auto eval = evaluate_batch(r.params, val, r.class_weights);
  EXPECT_NEAR(eval.mean_loss + l2_penalty(r.params), best, 1e-12);
}

TEST(Train, SingleClassRejected) {
  auto data = blobs(4, 4, 16, 16);
  for (auto& s : data) s.label = 0;
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.patience_epochs = 1;
  try {
    train(tiny_config(), tc, data, data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassDataset);
  }
}

TEST(Checkpoint, RoundTripAndTrailingBytes) {
  ModelParams p(tiny_config(), 4, 16, 77);
  const auto path = std::filesystem::temp_directory_path() / "acfkit_t.segn";
  save_checkpoint(p, path);
  auto q = load_checkpoint(path);
  EXPECT_EQ(q.values(), p.values());
  EXPECT_EQ(q.layout().input_channels, 4u);
  EXPECT_EQ(q.init_seed(), 77u);
  {
    std::ifstream in(path, std::ios::binary);
    char magic[5];
    in.read(magic, 5);
    EXPECT_EQ(std::string(magic, 4), "SEGN");
    EXPECT_EQ(magic[4], 1);
  }
  std::ofstream(path, std::ios::binary | std::ios::app) << 'x';
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(ModelConfigValidation, RejectsBadValues) {
  ModelConfig c;
  c.dilations = {1, 0};
  EXPECT_THROW(c.validate(), Error);
  ModelConfig d;
  d.l2_lambda = -1;
  EXPECT_THROW(d.validate(), Error);
  TrainConfig t;
  t.patience_epochs = t.max_epochs + 1;
  EXPECT_THROW(t.validate(), Error);
}
