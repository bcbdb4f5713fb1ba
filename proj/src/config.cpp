#include "acfkit/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "acfkit/error.hpp"

namespace acfkit {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads fields of one JSON object and, on finish(), rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, context_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}.{}: {}", context_, key, e.what()));
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    T value{};
    known_.insert(key);
    if (auto it = j_.find(key); it == j_.end() || it->is_null()) return;
    get(key, value);
    out = value;
  }

  template <class Fn>
  void nested(const char* key, Fn&& fn) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    fn(*it, context_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) {
        throw Error(ErrorCode::ConfigError, fmt::format("{}: unknown key '{}'", context_, it.key()));
      }
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> known_;
};

Matrix matrix_from_json(const json& j, const std::string& context) {
  try {
    auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols()) throw Error(ErrorCode::ConfigError, context + ": ragged matrix");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, context + ": " + e.what());
  }
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json out = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return out;
}

Matrix chain_coupling(std::size_t channels, double self, double cross) {
  Matrix a(channels, channels);
  for (std::size_t i = 0; i < channels; ++i) {
    a(i, i) = self;
    if (i > 0) a(i, i - 1) = cross;
  }
  return a;
}

template <class Enum, class Parse>
void read_enum(ObjectReader& reader, const char* key, Enum& out, Parse parse) {
  std::optional<std::string> text;
  reader.get(key, text);
  if (text) out = parse(*text);
}

}  // namespace

SynthConfig SynthSettings::class_config(Label label, std::uint64_t seed, double frame_rate_hz) const {
  SynthConfig cfg;
  cfg.channels = channels;
  const bool depressed = label == Label::depressed;
  cfg.coupling = depressed ? coupling_depressed : coupling_not_depressed;
  cfg.coupling_delay = depressed ? delay_depressed : delay_not_depressed;
  cfg.noise_std = noise_std;
  cfg.seed = derive_seed(seed, depressed ? 0xD : 0x5);
  cfg.frame_rate_hz = frame_rate_hz;
  cfg.frames = cfg.coupling_delay + 1;
  return cfg;
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.train.learning_rate = 1e-3;
  cfg.train.batch_size = 32;
  cfg.train.max_epochs = 150;
  cfg.train.patience_epochs = 20;
  cfg.synth.coupling_not_depressed = chain_coupling(cfg.synth.channels, 0.5, 0.4);
  cfg.synth.coupling_depressed = chain_coupling(cfg.synth.channels, 0.5, 0.3);
  return cfg;
}

void PipelineConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("schema_version {} is not supported (expected {})", schema_version, kConfigSchemaVersion));
  }
  if (!(frame_rate_hz > 0.0)) throw Error(ErrorCode::ConfigError, "frame_rate_hz must be positive");
  if (threads < 1) throw Error(ErrorCode::ConfigError, "threads must be >= 1");
  segmentation.validate();
  model.validate();
  train.validate();
  const std::size_t window = static_cast<std::size_t>(std::llround(segmentation.min_s * frame_rate_hz));
  if (acf.max_delay_frames >= window) {
    throw Error(ErrorCode::ConfigError, fmt::format("acf.max_delay_frames {} must be below the shortest segment ({} frames)",
                                                    acf.max_delay_frames, window));
  }
  const double total = split.train + split.val + split.test;
  if (!(split.train > 0.0 && split.val > 0.0 && split.test > 0.0) || std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::ConfigError, "split fractions must be positive and sum to 1");
  }
  for (Label l : {Label::not_depressed, Label::depressed}) synth.class_config(l, seed, frame_rate_hz).validate();
}

void PipelineConfig::propagate_seed(std::uint64_t new_seed) {
  seed = new_seed;
  train.seed = new_seed;
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["dilations"] = c.dilations;
  j["parallel_kernel"] = c.parallel_kernel;
  j["parallel_filters"] = c.parallel_filters;
  j["seq_kernels"] = c.seq_kernels;
  j["seq_filters"] = c.seq_filters;
  j["dense_units"] = c.dense_units;
  j["leaky_slope"] = c.leaky_slope;
  j["l2_lambda"] = c.l2_lambda;
  j["classes"] = c.classes;
  j["dropout"] = c.dropout;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  ObjectReader r(j, "model");
  r.get("dilations", c.dilations);
  r.get("parallel_kernel", c.parallel_kernel);
  r.get("parallel_filters", c.parallel_filters);
  r.get("seq_kernels", c.seq_kernels);
  r.get("seq_filters", c.seq_filters);
  r.get("dense_units", c.dense_units);
  r.get("leaky_slope", c.leaky_slope);
  r.get("l2_lambda", c.l2_lambda);
  r.get("classes", c.classes);
  r.get("dropout", c.dropout);
  r.finish();
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience_epochs"] = c.patience_epochs;
  if (c.class_weights) {
    j["class_weights"] = *c.class_weights;
  } else {
    j["class_weights"] = "auto";
  }
  j["seed"] = c.seed;
  j["init_scale"] = c.init_scale;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  ObjectReader r(j, "train");
  r.get("learning_rate", c.learning_rate);
  r.get("batch_size", c.batch_size);
  r.get("max_epochs", c.max_epochs);
  r.get("patience_epochs", c.patience_epochs);
  r.nested("class_weights", [&](const json& w, const std::string& ctx) {
    if (w.is_string()) {
      if (w.get<std::string>() != "auto") throw Error(ErrorCode::ConfigError, ctx + ": expected \"auto\" or [w_d, w_nd]");
      c.class_weights.reset();
    } else {
      try {
        c.class_weights = w.get<std::array<double, 2>>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, ctx + ": " + e.what());
      }
    }
  });
  r.get("seed", c.seed);
  r.get("init_scale", c.init_scale);
  r.finish();
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["frame_rate_hz"] = c.frame_rate_hz;
  j["threads"] = c.threads;
  ordered_json seg;
  seg["window_s"] = c.segmentation.window_s;
  seg["shift_s"] = c.segmentation.shift_s;
  seg["min_s"] = c.segmentation.min_s;
  seg["truncate_s"] = c.segmentation.truncate_s ? json(*c.segmentation.truncate_s) : json(nullptr);
  j["segmentation"] = seg;
  j["standardize"] = c.standardize == StandardizeScope::segment ? "segment" : "recording";
  j["acf"] = {{"max_delay_frames", c.acf.max_delay_frames}, {"method", to_string(c.acf_method)}};
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["aggregation"] = to_string(c.aggregation);
  ordered_json synth;
  synth["channels"] = c.synth.channels;
  synth["sessions_per_class"] = {c.synth.sessions.not_depressed, c.synth.sessions.depressed};
  synth["duration_range_s"] = {c.synth.duration_range_s.first, c.synth.duration_range_s.second};
  synth["noise_std"] = c.synth.noise_std;
  synth["coupling_not_depressed"] = matrix_to_json(c.synth.coupling_not_depressed);
  synth["delay_not_depressed"] = c.synth.delay_not_depressed;
  synth["coupling_depressed"] = matrix_to_json(c.synth.coupling_depressed);
  synth["delay_depressed"] = c.synth.delay_depressed;
  j["synth"] = synth;
  j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
  ordered_json paths = ordered_json::object();
  if (c.paths.manifest) paths["manifest"] = *c.paths.manifest;
  if (c.paths.features) paths["features"] = *c.paths.features;
  if (c.paths.checkpoint) paths["checkpoint"] = *c.paths.checkpoint;
  if (c.paths.out) paths["out"] = *c.paths.out;
  j["paths"] = paths;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c = PipelineConfig::defaults();
  ObjectReader r(j, "config");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw Error(ErrorCode::ConfigError, fmt::format("schema_version {} is not supported", c.schema_version));
  }
  r.get("seed", c.seed);
  r.get("frame_rate_hz", c.frame_rate_hz);
  r.get("threads", c.threads);
  r.nested("segmentation", [&](const json& s, const std::string& ctx) {
    ObjectReader sr(s, ctx);
    sr.get("window_s", c.segmentation.window_s);
    sr.get("shift_s", c.segmentation.shift_s);
    sr.get("min_s", c.segmentation.min_s);
    sr.get("truncate_s", c.segmentation.truncate_s);
    sr.finish();
  });
  read_enum(r, "standardize", c.standardize, [](const std::string& s) {
    if (s == "segment") return StandardizeScope::segment;
    if (s == "recording") return StandardizeScope::recording;
    throw Error(ErrorCode::ConfigError, "standardize must be 'segment' or 'recording'");
  });
  r.nested("acf", [&](const json& a, const std::string& ctx) {
    ObjectReader ar(a, ctx);
    ar.get("max_delay_frames", c.acf.max_delay_frames);
    read_enum(ar, "method", c.acf_method, acf_method_from_string);
    ar.finish();
  });
  r.nested("model", [&](const json& m, const std::string&) { c.model = model_config_from_json(m); });
  r.nested("train", [&](const json& t, const std::string&) {
    // keys absent from the file keep the pipeline defaults
    json merged = json::parse(to_json(c.train).dump());
    for (auto it = t.begin(); it != t.end(); ++it) merged[it.key()] = it.value();
    if (!t.is_object()) throw Error(ErrorCode::ConfigError, "config.train must be a JSON object");
    c.train = train_config_from_json(merged);
  });
  read_enum(r, "aggregation", c.aggregation, aggregation_policy_from_string);
  r.nested("synth", [&](const json& s, const std::string& ctx) {
    ObjectReader sr(s, ctx);
    sr.get("channels", c.synth.channels);
    std::optional<std::array<std::size_t, 2>> counts;
    sr.get("sessions_per_class", counts);
    if (counts) c.synth.sessions = {(*counts)[0], (*counts)[1]};
    sr.get("duration_range_s", c.synth.duration_range_s);
    sr.get("noise_std", c.synth.noise_std);
    sr.nested("coupling_not_depressed", [&](const json& m, const std::string& mctx) {
      c.synth.coupling_not_depressed = matrix_from_json(m, mctx);
    });
    sr.get("delay_not_depressed", c.synth.delay_not_depressed);
    sr.nested("coupling_depressed", [&](const json& m, const std::string& mctx) {
      c.synth.coupling_depressed = matrix_from_json(m, mctx);
    });
    sr.get("delay_depressed", c.synth.delay_depressed);
    sr.finish();
  });
  r.nested("split", [&](const json& s, const std::string& ctx) {
    ObjectReader sr(s, ctx);
    sr.get("train", c.split.train);
    sr.get("val", c.split.val);
    sr.get("test", c.split.test);
    sr.finish();
  });
  r.nested("paths", [&](const json& p, const std::string& ctx) {
    ObjectReader pr(p, ctx);
    pr.get("manifest", c.paths.manifest);
    pr.get("features", c.paths.features);
    pr.get("checkpoint", c.paths.checkpoint);
    pr.get("out", c.paths.out);
    pr.finish();
  });
  r.finish();
  if (c.train.seed != c.seed && j.contains("train") && j["train"].contains("seed")) {
    throw Error(ErrorCode::ConfigError, "train.seed must match the top-level seed");
  }
  c.propagate_seed(c.seed);
  if (c.synth.coupling_not_depressed.rows() != c.synth.channels ||
      c.synth.coupling_depressed.rows() != c.synth.channels) {
    throw Error(ErrorCode::ConfigError, "synth coupling matrices must be channels x channels");
  }
  c.validate();
  return c;
}

nlohmann::json parse_json_with_lines(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto ? upto - 1 : 0), '\n');
    throw Error(ErrorCode::ParseError, fmt::format("{}: line {}: {}", source, line, e.what()));
  }
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_with_lines(buf.str(), path.string());
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  try {
    return pipeline_config_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::IoError) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
    throw;
  }
}

}  // namespace acfkit
