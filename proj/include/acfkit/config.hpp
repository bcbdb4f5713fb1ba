#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>

#include "acfkit/acf.hpp"
#include "acfkit/segnet.hpp"
#include "acfkit/signal.hpp"
#include "acfkit/vote.hpp"

namespace acfkit {

inline constexpr int kConfigSchemaVersion = 1;

enum class StandardizeScope { segment, recording };

// Synthetic two-class corpus. By default the depressed class differs only by
// weaker cross-channel coupling; each class has its own coupling delay.
struct SynthSettings {
  std::size_t channels = 3;
  SessionCounts sessions{10, 10};
  std::pair<double, double> duration_range_s{90.0, 180.0};
  double noise_std = 1.0;
  Matrix coupling_not_depressed;
  std::size_t delay_not_depressed = 2;
  Matrix coupling_depressed;
  std::size_t delay_depressed = 2;

  SynthConfig class_config(Label label, std::uint64_t seed, double frame_rate_hz) const;
};

struct SplitSettings {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct PathSettings {
  std::optional<std::string> manifest;
  std::optional<std::string> features;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out;
};

struct PipelineConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = kDefaultSeed;
  double frame_rate_hz = 100.0;
  unsigned threads = 1;
  SegmentationConfig segmentation;
  StandardizeScope standardize = StandardizeScope::segment;
  AcfConfig acf;
  AcfMethod acf_method = AcfMethod::fast;
  ModelConfig model;
  TrainConfig train;
  AggregationPolicy aggregation = AggregationPolicy::plurality_vote;
  SynthSettings synth;
  SplitSettings split;
  PathSettings paths;

  /// Desk-scale defaults for the synthetic corpus.
  static PipelineConfig defaults();
  void validate() const;
  /// Pushes the global seed and thread count into every component.
  void propagate_seed(std::uint64_t new_seed);
};

// JSON conversions. Readers reject unknown keys and throw ConfigError.
nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Parses JSON text; on failure the ParseError message names the line.
nlohmann::json parse_json_with_lines(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace acfkit
