#pragma once

// End-to-end commands: synthetic data, feature extraction, training,
// segment/session evaluation, vote-theory reports and plotting.

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "acfkit/config.hpp"
#include "acfkit/metrics.hpp"
#include "acfkit/segnet.hpp"

namespace acfkit {

/// Writes sessions/<id>.csv plus manifest.json; returns the manifest path.
std::filesystem::path cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

struct FeatureEntry {
  std::string session_id;
  std::size_t segment_index = 0;
  std::size_t start_frame = 0;
  std::size_t frames = 0;
  int hamd = 0;
  Label label = Label::not_depressed;
  std::filesystem::path path;  // binary ACF1 file
};

struct SkippedSession {
  std::string session_id;
  std::string reason;
};

// features.json plus one ACF file per segment.
struct FeatureStore {
  std::filesystem::path root;
  std::size_t channels = 0;
  std::size_t max_delay = 0;
  std::vector<FeatureEntry> segments;
  std::vector<SkippedSession> skipped;

  static FeatureStore load(const std::filesystem::path& dir);
  std::vector<std::string> session_ids() const;
};

struct ExtractOptions {
  bool write_csv = false;
};

/// standardize -> segment -> ACF for every manifest session. Sessions that
/// fail (constant channel, no usable segment) are recorded and skipped.
FeatureStore cmd_extract(const std::filesystem::path& manifest, const PipelineConfig& cfg,
                         const std::filesystem::path& out_dir, const ExtractOptions& options = {});

// Session-disjoint, class-stratified train/val/test assignment.
struct SessionSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  nlohmann::ordered_json to_json() const;
  static SessionSplit from_json(const nlohmann::json& j);
};

SessionSplit split_sessions(const FeatureStore& store, const SplitSettings& split, std::uint64_t seed);

struct TrainSummary {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::filesystem::path split;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  double best_val_uar = 0.0;
};

/// Trains on the train split with early stopping on the val split and writes
/// model.segn, train_log.csv and split.json to out_dir.
TrainSummary cmd_train(const std::filesystem::path& features_dir, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir);

struct ClassTheoryCheck {
  double segment_recall = 0.0;
  std::size_t sessions = 0;
  double observed_session_recall = 0.0;
  double expected_session_recall = 0.0;  // mean exact PV recall over the sessions' segment counts
  Interval mc_interval;                  // central 95% of simulated session recall
  bool consistent = false;
};

struct EvalReport {
  AggregationPolicy policy = AggregationPolicy::plurality_vote;
  MetricsReport segment;
  MetricsReport session;
  std::array<ClassTheoryCheck, 2> theory;  // indexed by class

  nlohmann::ordered_json to_json() const;
};

/// Evaluates the checkpoint on the test split at segment and session level.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& features_dir,
                    const std::filesystem::path& split_file, const PipelineConfig& cfg);

/// Predicted session recall band for sessions of given segment counts, each
/// segment correct with probability p. Simulated with `replicas` draws.
ClassTheoryCheck pv_theory_check(double segment_recall, const std::vector<std::size_t>& segments_per_session,
                                 std::size_t observed_correct, std::uint64_t seed, std::size_t replicas = 20000);

enum class VoteMode { exact, brute, simulate, check };

VoteMode vote_mode_from_string(const std::string& text);

struct VoteCommand {
  VoteMode mode = VoteMode::exact;
  double p0 = 0.6;
  std::size_t n = 3;
  std::size_t trials = 100000;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
};

struct VoteOutcome {
  nlohmann::ordered_json report;
  bool theorem_holds = true;
};

/// JSON report {p0, N, exact, brute_force, margin, mc_estimate, ci_low, ci_high};
/// `check` sweeps p0 in [0.5, 1] x N in [1, 50] instead.
VoteOutcome cmd_vote(const VoteCommand& command);

/// Renders ROC curves (from eval metrics) or recall-vs-N curves (from a vote
/// check report) as SVG files in out_dir. Returns the files written.
std::vector<std::filesystem::path> cmd_plot(const std::vector<std::filesystem::path>& inputs,
                                            const std::filesystem::path& out_dir);

void write_json_file(const nlohmann::ordered_json& doc, const std::filesystem::path& path);

}  // namespace acfkit
