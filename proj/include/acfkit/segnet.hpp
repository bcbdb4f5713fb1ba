#pragma once

// Dilated-convolution segment classifier: parallel dilated branches over the
// delay axis, two sequential convolutions, two ReLU dense layers and a
// softmax output. Written out by hand with exact backpropagation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acfkit/matrix.hpp"
#include "acfkit/rng.hpp"

namespace acfkit {

struct ModelConfig {
  std::vector<std::size_t> dilations{1, 3, 7, 15};
  std::size_t parallel_kernel = 15;
  std::size_t parallel_filters = 8;
  std::vector<std::size_t> seq_kernels{3, 3};
  std::vector<std::size_t> seq_filters{8, 8};
  std::vector<std::size_t> dense_units{16, 8};
  double leaky_slope = 0.01;
  double l2_lambda = 0.01;  // on the hidden dense kernels
  std::size_t classes = 2;
  double dropout = 0.0;  // after each hidden dense layer, training only

  void validate() const;
};

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  std::size_t weight_offset = 0;  // filters x in_channels x kernel
  std::size_t bias_offset = 0;
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t units = 0;
  std::size_t weight_offset = 0;  // units x inputs
  std::size_t bias_offset = 0;
  bool regularized = false;
};

// Where every tensor lives inside the flat parameter vector, in declaration
// order: branches, sequential convs, hidden dense layers, output layer.
struct ModelLayout {
  std::size_t input_channels = 0;
  std::size_t input_length = 0;
  std::vector<ConvLayer> branches;
  std::vector<ConvLayer> sequential;
  std::vector<DenseLayer> hidden;
  DenseLayer output;
  std::size_t parameter_count = 0;

  static ModelLayout build(const ModelConfig& cfg, std::size_t input_channels, std::size_t input_length);
  std::size_t embedding_size() const noexcept;
};

class ModelParams {
 public:
  ModelParams(ModelConfig config, std::size_t input_channels, std::size_t input_length,
              std::uint64_t init_seed = kDefaultSeed);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelLayout& layout() const noexcept { return layout_; }
  std::uint64_t init_seed() const noexcept { return init_seed_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Glorot-uniform kernels scaled by `scale`, zero biases.
  void initialize(std::uint64_t seed, double scale = 1.0);

 private:
  ModelConfig config_;
  ModelLayout layout_;
  std::uint64_t init_seed_;
  std::vector<double> values_;
};

/// Causal dilated cross-correlation with left zero padding; output keeps the
/// input length. `weights` is filters x channels x kernel.
Matrix dilated_conv1d(const Matrix& input, std::span<const double> weights, std::span<const double> bias,
                      std::size_t kernel, std::size_t dilation);

std::vector<double> model_forward(const ModelParams& params, const Matrix& input);

/// Flattened output of the last sequential convolution (filters x length).
std::vector<double> embed_segment(const ModelParams& params, const Matrix& input);

/// Smallest |pre-activation| over all rectified units. Finite-difference
/// checks are only meaningful when no unit sits within the step of its kink.
double activation_margin(const ModelParams& params, const Matrix& input);

inline constexpr double kProbFloor = 1e-12;

struct LossValue {
  double loss = 0.0;
  bool clamped = false;  // prob[label] was below kProbFloor
};

/// -class_weight * ln(prob[label]) with the probability floored at 1e-12.
LossValue weighted_cross_entropy(std::span<const double> probs, int label, double class_weight);

/// lambda * sum of squared hidden dense weights.
double l2_penalty(const ModelParams& params);

struct Gradients {
  double loss = 0.0;  // data term plus l2 penalty
  std::vector<double> values;
};

/// Exact gradient of the weighted loss plus l2 penalty for one sample.
Gradients model_backward(const ModelParams& params, const Matrix& input, int label, double class_weight);

struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 300;
  std::size_t patience_epochs = 20;
  std::optional<std::array<double, 2>> class_weights;  // empty = inverse frequency
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
  double init_scale = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct TrainingSample {
  Matrix input;
  int label = 0;
  std::string session_id;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_uar = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::array<double, 2> class_weights{1.0, 1.0};
};

/// Inverse class frequency, scaled so the per-sample mean weight is 1.
std::array<double, 2> auto_class_weights(std::span<const int> labels);

/// Holds out about `fraction` of the sessions of each class (never single
/// segments) for validation. Returns {train, validation} indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_session(
    std::span<const TrainingSample> samples, double fraction, std::uint64_t seed);

/// Adam on the class-weighted loss with early stopping on validation loss.
/// The returned parameters are those of the best validation epoch. With an
/// empty `validation` set, 20% of the training sessions are held out.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  std::span<const TrainingSample> training, std::span<const TrainingSample> validation = {});

struct BatchEvaluation {
  std::vector<std::vector<double>> probs;
  double mean_loss = 0.0;  // weighted data loss, no penalty
};

BatchEvaluation evaluate_batch(const ModelParams& params, std::span<const TrainingSample> samples,
                               const std::array<double, 2>& class_weights, unsigned threads = 1);

// Checkpoint: "SEGN", version byte, uint32 JSON length, JSON config block,
// then every parameter as a little-endian double in declaration order.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace acfkit
