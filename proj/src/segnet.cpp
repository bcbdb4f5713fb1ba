#include "acfkit/segnet.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include "acfkit/config.hpp"
#include "acfkit/error.hpp"
#include "acfkit/metrics.hpp"
#include "acfkit/parallel.hpp"
#include "byte_io.hpp"

namespace acfkit {

namespace fs = std::filesystem;

void ModelConfig::validate() const {
  if (dilations.empty()) throw Error(ErrorCode::ConfigError, "model needs at least one dilated branch");
  for (auto d : dilations)
    if (d < 1) throw Error(ErrorCode::ConfigError, "dilations must be positive");
  if (parallel_kernel < 1 || parallel_filters < 1) throw Error(ErrorCode::ConfigError, "branch kernel/filters must be >= 1");
  if (seq_kernels.size() != seq_filters.size()) {
    throw Error(ErrorCode::ConfigError, "seq_kernels and seq_filters must have equal length");
  }
  for (auto k : seq_kernels)
    if (k < 1) throw Error(ErrorCode::ConfigError, "kernel sizes must be >= 1");
  for (auto f : seq_filters)
    if (f < 1) throw Error(ErrorCode::ConfigError, "filter counts must be >= 1");
  for (auto u : dense_units)
    if (u < 1) throw Error(ErrorCode::ConfigError, "dense units must be >= 1");
  if (!(l2_lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "l2_lambda must be >= 0");
  if (!(leaky_slope >= 0.0)) throw Error(ErrorCode::ConfigError, "leaky_slope must be >= 0");
  if (classes < 2) throw Error(ErrorCode::ConfigError, "need at least two classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::ConfigError, "dropout must be in [0, 1)");
}

ModelLayout ModelLayout::build(const ModelConfig& cfg, std::size_t input_channels, std::size_t input_length) {
  cfg.validate();
  if (input_channels == 0 || input_length == 0) throw Error(ErrorCode::ShapeMismatch, "empty model input shape");
  ModelLayout layout;
  layout.input_channels = input_channels;
  layout.input_length = input_length;
  std::size_t offset = 0;
  auto conv = [&](std::size_t in, std::size_t filters, std::size_t kernel, std::size_t dilation) {
    ConvLayer l{in, filters, kernel, dilation, offset, offset + filters * in * kernel};
    offset = l.bias_offset + filters;
    return l;
  };
  auto dense = [&](std::size_t in, std::size_t units, bool regularized) {
    DenseLayer l{in, units, offset, offset + units * in, regularized};
    offset = l.bias_offset + units;
    return l;
  };
  for (auto d : cfg.dilations) layout.branches.push_back(conv(input_channels, cfg.parallel_filters, cfg.parallel_kernel, d));
  std::size_t channels = cfg.parallel_filters * cfg.dilations.size();
  for (std::size_t i = 0; i < cfg.seq_filters.size(); ++i) {
    layout.sequential.push_back(conv(channels, cfg.seq_filters[i], cfg.seq_kernels[i], 1));
    channels = cfg.seq_filters[i];
  }
  std::size_t width = channels * input_length;
  for (auto units : cfg.dense_units) {
    layout.hidden.push_back(dense(width, units, true));
    width = units;
  }
  layout.output = dense(width, cfg.classes, false);
  layout.parameter_count = offset;
  return layout;
}

std::size_t ModelLayout::embedding_size() const noexcept {
  const std::size_t channels = sequential.empty() ? branches.size() * branches.front().filters
                                                  : sequential.back().filters;
  return channels * input_length;
}

ModelParams::ModelParams(ModelConfig config, std::size_t input_channels, std::size_t input_length,
                         std::uint64_t init_seed)
    : config_(std::move(config)),
      layout_(ModelLayout::build(config_, input_channels, input_length)),
      init_seed_(init_seed),
      values_(layout_.parameter_count, 0.0) {
  initialize(init_seed);
}

void ModelParams::initialize(std::uint64_t seed, double scale) {
  init_seed_ = seed;
  std::mt19937_64 engine(seed);
  std::fill(values_.begin(), values_.end(), 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < count; ++i) values_[offset + i] = scale * dist(engine);
  };
  auto conv = [&](const ConvLayer& l) {
    fill(l.weight_offset, l.filters * l.in_channels * l.kernel, static_cast<double>(l.in_channels * l.kernel),
         static_cast<double>(l.filters * l.kernel));
  };
  auto dense = [&](const DenseLayer& l) {
    fill(l.weight_offset, l.units * l.inputs, static_cast<double>(l.inputs), static_cast<double>(l.units));
  };
  for (const auto& l : layout_.branches) conv(l);
  for (const auto& l : layout_.sequential) conv(l);
  for (const auto& l : layout_.hidden) dense(l);
  dense(layout_.output);
}

namespace {

// Forward convolution into `out` (filters x length), bias included.
void conv_forward(const Matrix& in, const double* w, const double* b, std::size_t filters, std::size_t kernel,
                  std::size_t dilation, Matrix& out) {
  const std::size_t channels = in.rows();
  const std::size_t length = in.cols();
  out = Matrix(filters, length);
  for (std::size_t f = 0; f < filters; ++f) {
    double* o = out.row(f).data();
    std::fill(o, o + length, b[f]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* x = in.row(c).data();
      const double* wk = w + (f * channels + c) * kernel;
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::size_t shift = k * dilation;
        if (shift >= length) break;
        const double weight = wk[k];
        for (std::size_t t = shift; t < length; ++t) o[t] += weight * x[t - shift];
      }
    }
  }
}

// Accumulates dW, db and (optionally) dIn for one convolution.
void conv_backward(const Matrix& in, const Matrix& d_out, const double* w, double* dw, double* db,
                   std::size_t kernel, std::size_t dilation, Matrix* d_in) {
  const std::size_t channels = in.rows();
  const std::size_t length = in.cols();
  const std::size_t filters = d_out.rows();
  for (std::size_t f = 0; f < filters; ++f) {
    const double* g = d_out.row(f).data();
    double bias_grad = 0.0;
    for (std::size_t t = 0; t < length; ++t) bias_grad += g[t];
    db[f] += bias_grad;
    for (std::size_t c = 0; c < channels; ++c) {
      const double* x = in.row(c).data();
      const std::size_t base = (f * channels + c) * kernel;
      double* dxi = d_in ? d_in->row(c).data() : nullptr;
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::size_t shift = k * dilation;
        if (shift >= length) break;
        double acc = 0.0;
        for (std::size_t t = shift; t < length; ++t) acc += g[t] * x[t - shift];
        dw[base + k] += acc;
        if (dxi) {
          const double weight = w[base + k];
          for (std::size_t t = shift; t < length; ++t) dxi[t - shift] += weight * g[t];
        }
      }
    }
  }
}

void leaky_inplace(Matrix& m, double slope) {
  for (double& v : m.data()) v = v > 0.0 ? v : slope * v;
}

struct ForwardCache {
  std::vector<Matrix> branch_pre;
  Matrix concat;
  std::vector<Matrix> seq_pre;
  std::vector<Matrix> seq_out;
  std::vector<std::vector<double>> dense_pre;
  std::vector<std::vector<double>> dense_out;
  std::vector<std::vector<double>> masks;
  std::vector<double> probs;

  const Matrix& features() const { return seq_out.empty() ? concat : seq_out.back(); }
};

void check_input(const ModelLayout& layout, const Matrix& input) {
  if (input.rows() != layout.input_channels || input.cols() != layout.input_length) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("model expects {}x{} input, got {}x{}", layout.input_channels,
                                                      layout.input_length, input.rows(), input.cols()));
  }
}

// `dropout_key` is only consulted when dropout > 0 and training is true.
void forward(const ModelParams& params, const Matrix& input, ForwardCache& cache, bool training,
             std::uint64_t dropout_key) {
  const auto& layout = params.layout();
  const auto& cfg = params.config();
  const double* p = params.values().data();
  check_input(layout, input);
  const std::size_t length = layout.input_length;

  cache.branch_pre.resize(layout.branches.size());
  const std::size_t branch_filters = layout.branches.front().filters;
  cache.concat = Matrix(branch_filters * layout.branches.size(), length);
  for (std::size_t b = 0; b < layout.branches.size(); ++b) {
    const auto& l = layout.branches[b];
    conv_forward(input, p + l.weight_offset, p + l.bias_offset, l.filters, l.kernel, l.dilation,
                 cache.branch_pre[b]);
    for (std::size_t f = 0; f < l.filters; ++f) {
      auto src = cache.branch_pre[b].row(f);
      auto dst = cache.concat.row(b * branch_filters + f);
      for (std::size_t t = 0; t < length; ++t) dst[t] = src[t] > 0.0 ? src[t] : cfg.leaky_slope * src[t];
    }
  }

  cache.seq_pre.resize(layout.sequential.size());
  cache.seq_out.resize(layout.sequential.size());
  const Matrix* current = &cache.concat;
  for (std::size_t s = 0; s < layout.sequential.size(); ++s) {
    const auto& l = layout.sequential[s];
    conv_forward(*current, p + l.weight_offset, p + l.bias_offset, l.filters, l.kernel, l.dilation, cache.seq_pre[s]);
    cache.seq_out[s] = cache.seq_pre[s];
    leaky_inplace(cache.seq_out[s], cfg.leaky_slope);
    current = &cache.seq_out[s];
  }

  const bool use_dropout = training && cfg.dropout > 0.0;
  cache.dense_pre.resize(layout.hidden.size());
  cache.dense_out.resize(layout.hidden.size());
  cache.masks.assign(use_dropout ? layout.hidden.size() : 0, {});
  const std::vector<double>* activation = &current->data();
  for (std::size_t h = 0; h < layout.hidden.size(); ++h) {
    const auto& l = layout.hidden[h];
    auto& z = cache.dense_pre[h];
    z.assign(l.units, 0.0);
    for (std::size_t u = 0; u < l.units; ++u) {
      const double* w = p + l.weight_offset + u * l.inputs;
      double acc = p[l.bias_offset + u];
      for (std::size_t i = 0; i < l.inputs; ++i) acc += w[i] * (*activation)[i];
      z[u] = acc;
    }
    auto& a = cache.dense_out[h];
    a.resize(l.units);
    for (std::size_t u = 0; u < l.units; ++u) a[u] = z[u] > 0.0 ? z[u] : 0.0;
    if (use_dropout) {
      const CounterRng stream(derive_seed(dropout_key, h));
      auto& mask = cache.masks[h];
      mask.resize(l.units);
      const double keep = 1.0 - cfg.dropout;
      for (std::size_t u = 0; u < l.units; ++u) {
        mask[u] = stream.uniform(u) < keep ? 1.0 / keep : 0.0;
        a[u] *= mask[u];
      }
    }
    activation = &a;
  }

  const auto& out = layout.output;
  std::vector<double> logits(out.units);
  for (std::size_t c = 0; c < out.units; ++c) {
    const double* w = p + out.weight_offset + c * out.inputs;
    double acc = p[out.bias_offset + c];
    for (std::size_t i = 0; i < out.inputs; ++i) acc += w[i] * (*activation)[i];
    logits[c] = acc;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  cache.probs.resize(out.units);
  double total = 0.0;
  for (std::size_t c = 0; c < out.units; ++c) total += cache.probs[c] = std::exp(logits[c] - peak);
  for (double& v : cache.probs) v /= total;
}

// Adds the data-term gradient of one sample into `grad`; returns its loss.
LossValue backprop(const ModelParams& params, const Matrix& input, int label, double weight,
                   std::uint64_t dropout_key, bool training, std::span<double> grad) {
  const auto& layout = params.layout();
  const auto& cfg = params.config();
  const double* p = params.values().data();
  double* g = grad.data();
  if (label < 0 || static_cast<std::size_t>(label) >= layout.output.units) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("label {} outside model classes", label));
  }

  ForwardCache cache;
  forward(params, input, cache, training, dropout_key);
  const LossValue loss = weighted_cross_entropy(cache.probs, label, weight);
  if (loss.clamped) return loss;  // constant loss region, zero gradient

  std::vector<double> d_act(layout.output.units);
  for (std::size_t c = 0; c < d_act.size(); ++c) {
    d_act[c] = weight * (cache.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
  }

  auto dense_back = [&](const DenseLayer& l, const std::vector<double>& d_z, const std::vector<double>& in) {
    std::vector<double> d_in(l.inputs, 0.0);
    for (std::size_t u = 0; u < l.units; ++u) {
      const double dz = d_z[u];
      g[l.bias_offset + u] += dz;
      if (dz == 0.0) continue;
      const double* w = p + l.weight_offset + u * l.inputs;
      double* dw = g + l.weight_offset + u * l.inputs;
      for (std::size_t i = 0; i < l.inputs; ++i) {
        dw[i] += dz * in[i];
        d_in[i] += w[i] * dz;
      }
    }
    return d_in;
  };

  const std::vector<double>& flat = cache.features().data();
  auto layer_input = [&](std::size_t h) -> const std::vector<double>& {
    return h == 0 ? flat : cache.dense_out[h - 1];
  };

  d_act = dense_back(layout.output, d_act, layout.hidden.empty() ? flat : cache.dense_out.back());
  for (std::size_t h = layout.hidden.size(); h-- > 0;) {
    if (!cache.masks.empty())
      for (std::size_t u = 0; u < d_act.size(); ++u) d_act[u] *= cache.masks[h][u];
    for (std::size_t u = 0; u < d_act.size(); ++u) d_act[u] = cache.dense_pre[h][u] > 0.0 ? d_act[u] : 0.0;
    d_act = dense_back(layout.hidden[h], d_act, layer_input(h));
  }

  // d_act is now the gradient w.r.t. the flattened features.
  Matrix d_features(cache.features().rows(), cache.features().cols(), std::move(d_act));
  for (std::size_t s = layout.sequential.size(); s-- > 0;) {
    const auto& l = layout.sequential[s];
    const Matrix& pre = cache.seq_pre[s];
    for (std::size_t i = 0; i < d_features.size(); ++i) {
      if (!(pre.data()[i] > 0.0)) d_features.data()[i] *= cfg.leaky_slope;
    }
    const Matrix& in = s == 0 ? cache.concat : cache.seq_out[s - 1];
    Matrix d_in(in.rows(), in.cols());
    conv_backward(in, d_features, p + l.weight_offset, g + l.weight_offset, g + l.bias_offset, l.kernel,
                  l.dilation, &d_in);
    d_features = std::move(d_in);
  }

  const std::size_t branch_filters = layout.branches.front().filters;
  for (std::size_t b = 0; b < layout.branches.size(); ++b) {
    const auto& l = layout.branches[b];
    Matrix slice(l.filters, layout.input_length);
    for (std::size_t f = 0; f < l.filters; ++f) {
      auto src = d_features.row(b * branch_filters + f);
      auto pre = cache.branch_pre[b].row(f);
      auto dst = slice.row(f);
      for (std::size_t t = 0; t < src.size(); ++t) dst[t] = pre[t] > 0.0 ? src[t] : cfg.leaky_slope * src[t];
    }
    conv_backward(input, slice, p + l.weight_offset, g + l.weight_offset, g + l.bias_offset, l.kernel, l.dilation,
                  nullptr);
  }
  return loss;
}

void add_l2_gradient(const ModelParams& params, std::span<double> grad) {
  const double lambda = params.config().l2_lambda;
  if (lambda == 0.0) return;
  const auto& v = params.values();
  for (const auto& l : params.layout().hidden) {
    if (!l.regularized) continue;
    for (std::size_t i = 0; i < l.units * l.inputs; ++i) {
      grad[l.weight_offset + i] += 2.0 * lambda * v[l.weight_offset + i];
    }
  }
}

}  // namespace

Matrix dilated_conv1d(const Matrix& input, std::span<const double> weights, std::span<const double> bias,
                      std::size_t kernel, std::size_t dilation) {
  if (kernel < 1 || dilation < 1 || input.cols() < 1 || input.rows() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "convolution needs kernel, dilation and length >= 1");
  }
  const std::size_t filters = bias.size();
  if (weights.size() != filters * input.rows() * kernel) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("weights hold {} values, expected {}x{}x{}", weights.size(), filters, input.rows(), kernel));
  }
  Matrix out;
  conv_forward(input, weights.data(), bias.data(), filters, kernel, dilation, out);
  return out;
}

std::vector<double> model_forward(const ModelParams& params, const Matrix& input) {
  ForwardCache cache;
  forward(params, input, cache, false, 0);
  return cache.probs;
}

std::vector<double> embed_segment(const ModelParams& params, const Matrix& input) {
  ForwardCache cache;
  forward(params, input, cache, false, 0);
  return cache.features().data();
}

double activation_margin(const ModelParams& params, const Matrix& input) {
  ForwardCache cache;
  forward(params, input, cache, false, 0);
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&](std::span<const double> values) {
    for (double v : values) margin = std::min(margin, std::abs(v));
  };
  for (const auto& m : cache.branch_pre) scan(m.data());
  for (const auto& m : cache.seq_pre) scan(m.data());
  for (const auto& z : cache.dense_pre) scan(z);
  return margin;
}

LossValue weighted_cross_entropy(std::span<const double> probs, int label, double class_weight) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("label {} outside {} classes", label, probs.size()));
  }
  if (!(class_weight > 0.0)) throw Error(ErrorCode::InvalidArgument, "class weight must be positive");
  const double p = probs[static_cast<std::size_t>(label)];
  if (p < kProbFloor) return {-class_weight * std::log(kProbFloor), true};
  return {-class_weight * std::log(p), false};
}

double l2_penalty(const ModelParams& params) {
  double sum = 0.0;
  const auto& v = params.values();
  for (const auto& l : params.layout().hidden) {
    if (!l.regularized) continue;
    for (std::size_t i = 0; i < l.units * l.inputs; ++i) sum += v[l.weight_offset + i] * v[l.weight_offset + i];
  }
  return params.config().l2_lambda * sum;
}

Gradients model_backward(const ModelParams& params, const Matrix& input, int label, double class_weight) {
  Gradients out;
  out.values.assign(params.size(), 0.0);
  out.loss = backprop(params, input, label, class_weight, 0, false, out.values).loss + l2_penalty(params);
  add_l2_gradient(params, out.values);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be positive");
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::ConfigError, "max_epochs must be >= 1");
  if (patience_epochs > max_epochs) throw Error(ErrorCode::ConfigError, "patience_epochs exceeds max_epochs");
  if (class_weights && !((*class_weights)[0] > 0.0 && (*class_weights)[1] > 0.0)) {
    throw Error(ErrorCode::ConfigError, "class weights must be positive");
  }
}

std::array<double, 2> auto_class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> counts{};
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  if (counts[0] == 0 || counts[1] == 0) {
    throw Error(ErrorCode::SingleClassDataset, "both classes need at least one sample");
  }
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(counts[0])), n / (2.0 * static_cast<double>(counts[1]))};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_session(
    std::span<const TrainingSample> samples, double fraction, std::uint64_t seed) {
  // sessions per class in order of first appearance
  std::array<std::vector<std::string>, 2> sessions;
  std::map<std::string, int> session_class;
  for (const auto& s : samples) {
    if (session_class.emplace(s.session_id, s.label).second) sessions.at(static_cast<std::size_t>(s.label)).push_back(s.session_id);
  }
  std::map<std::string, bool> held_out;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& ids = sessions[c];
    const CounterRng stream(derive_seed(seed, 0x5E55 + c));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[stream.bits(i) % i]);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    if (take == 0 && ids.size() >= 2 && fraction > 0.0) take = 1;
    take = std::min(take, ids.size() > 0 ? ids.size() - 1 : 0);
    for (std::size_t i = 0; i < ids.size(); ++i) held_out[ids[i]] = i < take;
  }
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (held_out[samples[i].session_id] ? out.second : out.first).push_back(i);
  }
  return out;
}

BatchEvaluation evaluate_batch(const ModelParams& params, std::span<const TrainingSample> samples,
                               const std::array<double, 2>& class_weights, unsigned threads) {
  BatchEvaluation out;
  out.probs.resize(samples.size());
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    out.probs[i] = model_forward(params, samples[i].input);
    losses[i] = weighted_cross_entropy(out.probs[i], samples[i].label,
                                       class_weights.at(static_cast<std::size_t>(samples[i].label)))
                    .loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  out.mean_loss = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
  return out;
}

namespace {

double uar_of_present_classes(std::span<const TrainingSample> samples, const std::vector<std::vector<double>>& probs) {
  std::array<std::size_t, 2> hit{}, seen{};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<std::size_t>(samples[i].label);
    const auto pred = static_cast<std::size_t>(std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    ++seen[c];
    hit[c] += pred == c;
  }
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    if (seen[c] == 0) continue;
    sum += static_cast<double>(hit[c]) / static_cast<double>(seen[c]);
    ++present;
  }
  return present ? sum / present : std::numeric_limits<double>::quiet_NaN();
}

struct Adam {
  std::vector<double> m, v;
  std::size_t step = 0;

  void update(std::vector<double>& params, const std::vector<double>& grad, const TrainConfig& cfg) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
      params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
    }
  }
};

// Fixed chunking keeps the floating-point summation order independent of the
// number of worker threads.
constexpr std::size_t kGradientChunk = 8;

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, std::span<const TrainingSample> training,
                  std::span<const TrainingSample> validation) {
  train_cfg.validate();
  if (training.empty()) throw Error(ErrorCode::Empty, "no training samples");

  std::vector<TrainingSample> train_set, val_set;
  if (validation.empty()) {
    auto [tr, va] = split_by_session(training, 0.2, train_cfg.seed);
    for (auto i : tr) train_set.push_back(training[i]);
    for (auto i : va) val_set.push_back(training[i]);
  } else {
    train_set.assign(training.begin(), training.end());
    val_set.assign(validation.begin(), validation.end());
  }
  if (val_set.empty()) throw Error(ErrorCode::MissingSplit, "validation split is empty");

  std::vector<int> labels;
  for (const auto& s : train_set) labels.push_back(s.label);
  const auto inferred = auto_class_weights(labels);  // also rejects single-class data
  const std::array<double, 2> weights = train_cfg.class_weights.value_or(inferred);

  const Matrix& first = train_set.front().input;
  ModelParams params(model_cfg, first.rows(), first.cols(), train_cfg.seed);
  if (train_cfg.init_scale != 1.0) params.initialize(train_cfg.seed, train_cfg.init_scale);

  TrainResult result{params, {}, 0, false, weights};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  Adam adam;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<double> grad(params.size());

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const CounterRng shuffle(derive_seed(train_cfg.seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.bits(i) % i]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += train_cfg.batch_size) {
      const std::size_t count = std::min(train_cfg.batch_size, n - start);
      const std::size_t chunks = (count + kGradientChunk - 1) / kGradientChunk;
      std::vector<std::vector<double>> chunk_grad(chunks);
      std::vector<double> chunk_loss(chunks, 0.0);
      parallel_for(chunks, train_cfg.threads, [&](std::size_t c) {
        chunk_grad[c].assign(params.size(), 0.0);
        const std::size_t end = std::min(count, (c + 1) * kGradientChunk);
        for (std::size_t k = c * kGradientChunk; k < end; ++k) {
          const std::size_t idx = order[start + k];
          const auto& s = train_set[idx];
          const std::uint64_t dropout_key = derive_seed(train_cfg.seed ^ (epoch << 32), idx);
          chunk_loss[c] += backprop(params, s.input, s.label, weights[static_cast<std::size_t>(s.label)],
                                    dropout_key, true, chunk_grad[c])
                               .loss;
        }
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        batch_loss += chunk_loss[c];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += chunk_grad[c][i];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (double& gi : grad) gi *= inv;
      add_l2_gradient(params, grad);
      epoch_loss += (batch_loss * inv + l2_penalty(params)) * static_cast<double>(count);
      adam.update(params.values(), grad, train_cfg);
    }

    const auto val = evaluate_batch(params, val_set, weights, train_cfg.threads);
    EpochLog entry{epoch, epoch_loss / static_cast<double>(n), val.mean_loss + l2_penalty(params),
                   uar_of_present_classes(val_set, val.probs)};
    result.log.push_back(entry);
    spdlog::debug("epoch {:3d} train_loss {:.6f} val_loss {:.6f} val_uar {:.4f}", epoch, entry.train_loss,
                  entry.val_loss, entry.val_uar);

    if (entry.val_loss < best_val) {
      best_val = entry.val_loss;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= train_cfg.patience_epochs) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

void save_checkpoint(const ModelParams& params, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  nlohmann::ordered_json header;
  header["model"] = to_json(params.config());
  header["input_channels"] = params.layout().input_channels;
  header["input_length"] = params.layout().input_length;
  header["init_seed"] = params.init_seed();
  const std::string block = header.dump();
  out.write("SEGN", 4);
  out.put(static_cast<char>(1));
  detail::put_le(out, static_cast<std::uint32_t>(block.size()));
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  for (double v : params.values()) detail::put_f64(out, v);
  if (!out) throw Error(ErrorCode::IoError, "failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  const std::string what = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SEGN") throw Error(ErrorCode::ParseError, what + ": not a SEGN checkpoint");
  const int version = in.get();
  if (version != 1) throw Error(ErrorCode::ParseError, fmt::format("{}: unsupported checkpoint version {}", what, version));
  const auto length = detail::get_le<std::uint32_t>(in, what);
  std::string block(length, '\0');
  if (!in.read(block.data(), length)) throw Error(ErrorCode::ParseError, what + ": truncated config block");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(block);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, what + ": " + e.what());
  }
  ModelParams params(model_config_from_json(header.at("model")), header.at("input_channels").get<std::size_t>(),
                     header.at("input_length").get<std::size_t>(), header.at("init_seed").get<std::uint64_t>());
  for (double& v : params.values()) v = detail::get_f64(in, what);
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::ParseError, what + ": trailing bytes");
  return params;
}

void write_training_log(const std::vector<EpochLog>& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_uar\n";
  for (const auto& e : log) out << fmt::format("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_uar);
}

}  // namespace acfkit
