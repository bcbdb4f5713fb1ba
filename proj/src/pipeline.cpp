#include "acfkit/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "acfkit/error.hpp"
#include "acfkit/parallel.hpp"
#include "acfkit/series_io.hpp"

namespace acfkit {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kFeatureStoreVersion = 1;

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

int class_index(Label label) { return static_cast<int>(label); }

std::string segment_stem(const std::string& session_id, std::size_t index) {
  return fmt::format("{}_{:03d}", session_id, index);
}

}  // namespace

void write_json_file(const ordered_json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

fs::path cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  make_dirs(out_dir / "sessions");
  const auto dataset = make_labeled_dataset(cfg.synth.class_config(Label::not_depressed, cfg.seed, cfg.frame_rate_hz),
                                            cfg.synth.class_config(Label::depressed, cfg.seed, cfg.frame_rate_hz),
                                            cfg.synth.sessions, cfg.synth.duration_range_s);
  std::vector<ManifestEntry> manifest(dataset.size());
  parallel_for(dataset.size(), cfg.threads, [&](std::size_t i) {
    const auto& s = dataset[i];
    const fs::path rel = fs::path("sessions") / (s.label.session_id + ".csv");
    write_series_csv(s.series, out_dir / rel);
    manifest[i] = {s.label.session_id, rel, s.label.hamd};
  });
  const fs::path manifest_path = out_dir / "manifest.json";
  write_manifest(manifest, manifest_path);
  spdlog::info("wrote {} synthetic sessions to {}", manifest.size(), out_dir.string());
  return manifest_path;
}

FeatureStore FeatureStore::load(const fs::path& dir) {
  const json doc = read_json_file(dir / "features.json");
  FeatureStore store;
  store.root = dir;
  try {
    if (doc.at("schema_version").get<int>() != kFeatureStoreVersion) {
      throw Error(ErrorCode::ParseError, "unsupported feature store version");
    }
    store.channels = doc.at("channels").get<std::size_t>();
    store.max_delay = doc.at("max_delay").get<std::size_t>();
    for (const auto& e : doc.at("segments")) {
      FeatureEntry f;
      f.session_id = e.at("session_id").get<std::string>();
      f.segment_index = e.at("segment_index").get<std::size_t>();
      f.start_frame = e.at("start_frame").get<std::size_t>();
      f.frames = e.at("frames").get<std::size_t>();
      f.hamd = e.at("hamd").get<int>();
      f.label = label_from_string(e.at("label").get<std::string>());
      f.path = dir / e.at("path").get<std::string>();
      store.segments.push_back(std::move(f));
    }
    for (const auto& s : doc.at("skipped")) {
      store.skipped.push_back({s.at("session_id").get<std::string>(), s.at("reason").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "features.json").string() + ": " + e.what());
  }
  return store;
}

std::vector<std::string> FeatureStore::session_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& s : segments)
    if (seen.insert(s.session_id).second) ids.push_back(s.session_id);
  return ids;
}

FeatureStore cmd_extract(const fs::path& manifest_path, const PipelineConfig& cfg, const fs::path& out_dir,
                         const ExtractOptions& options) {
  cfg.validate();
  const auto manifest = read_manifest(manifest_path);
  make_dirs(out_dir / "acf");

  struct SessionResult {
    std::vector<FeatureEntry> entries;
    std::optional<std::string> skipped;
    std::size_t channels = 0;
  };
  std::vector<SessionResult> results(manifest.size());

  parallel_for(manifest.size(), cfg.threads, [&](std::size_t i) {
    const auto& item = manifest[i];
    auto& result = results[i];
    const Label label = hamd_label(item.hamd);
    MultiChannelSeries series = read_series_csv(item.csv_path, cfg.frame_rate_hz);
    result.channels = series.channels();
    try {
      if (cfg.standardize == StandardizeScope::recording) series = standardize_channels(series);
      auto segments = segment_session(series, cfg.segmentation, item.session_id);
      if (segments.empty()) {
        result.skipped = fmt::format("duration {:.2f} s is shorter than {} s", series.duration_s(), cfg.segmentation.min_s);
        return;
      }
      std::vector<AcfMatrix> acfs;
      for (auto& seg : segments) {
        if (cfg.segmentation.truncate_s) seg = truncate_fixed(seg, *cfg.segmentation.truncate_s, cfg.frame_rate_hz);
        if (cfg.standardize == StandardizeScope::segment) seg.values = standardize_rows(seg.values);
        acfs.push_back(compute_acf(seg.values, cfg.acf, cfg.acf_method));
      }
      for (std::size_t k = 0; k < segments.size(); ++k) {
        const std::string stem = segment_stem(item.session_id, k);
        const fs::path rel = fs::path("acf") / (stem + ".acf");
        write_acf_binary(acfs[k], out_dir / rel);
        if (options.write_csv) write_acf_csv(acfs[k], out_dir / "acf" / (stem + ".csv"));
        result.entries.push_back({item.session_id, k, segments[k].start_frame, segments[k].frames(), item.hamd, label, rel});
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantChannel && e.code() != ErrorCode::DelayTooLarge) throw;
      result.entries.clear();
      result.skipped = e.what();
    }
  });

  FeatureStore store;
  store.root = out_dir;
  store.max_delay = cfg.acf.max_delay_frames;
  ordered_json segments = ordered_json::array();
  ordered_json skipped = ordered_json::array();
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto& r = results[i];
    if (store.channels == 0) store.channels = r.channels;
    if (r.channels != store.channels) {
      throw Error(ErrorCode::MismatchedChannels,
                  fmt::format("session {} has {} channels, expected {}", manifest[i].session_id, r.channels, store.channels));
    }
    if (r.skipped) {
      spdlog::warn("skipping session {}: {}", manifest[i].session_id, *r.skipped);
      skipped.push_back({{"session_id", manifest[i].session_id}, {"reason", *r.skipped}});
      store.skipped.push_back({manifest[i].session_id, *r.skipped});
      continue;
    }
    for (auto& e : r.entries) {
      segments.push_back({{"session_id", e.session_id},
                          {"segment_index", e.segment_index},
                          {"start_frame", e.start_frame},
                          {"frames", e.frames},
                          {"hamd", e.hamd},
                          {"label", to_string(e.label)},
                          {"path", e.path.generic_string()}});
      e.path = out_dir / e.path;
      store.segments.push_back(std::move(e));
    }
  }
  ordered_json doc;
  doc["schema_version"] = kFeatureStoreVersion;
  doc["channels"] = store.channels;
  doc["max_delay"] = store.max_delay;
  doc["acf_method"] = to_string(cfg.acf_method);
  doc["frame_rate_hz"] = cfg.frame_rate_hz;
  doc["standardize"] = cfg.standardize == StandardizeScope::segment ? "segment" : "recording";
  doc["segments"] = std::move(segments);
  doc["skipped"] = std::move(skipped);
  write_json_file(doc, out_dir / "features.json");
  spdlog::info("extracted {} segments from {} sessions ({} skipped)", store.segments.size(),
               manifest.size() - store.skipped.size(), store.skipped.size());
  return store;
}

ordered_json SessionSplit::to_json() const {
  return {{"train", train}, {"val", val}, {"test", test}};
}

SessionSplit SessionSplit::from_json(const json& j) {
  try {
    return {j.at("train").get<std::vector<std::string>>(), j.at("val").get<std::vector<std::string>>(),
            j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("split file: ") + e.what());
  }
}

SessionSplit split_sessions(const FeatureStore& store, const SplitSettings& split, std::uint64_t seed) {
  std::array<std::vector<std::string>, 2> by_class;
  std::set<std::string> seen;
  for (const auto& s : store.segments) {
    if (seen.insert(s.session_id).second) by_class.at(static_cast<std::size_t>(class_index(s.label))).push_back(s.session_id);
  }
  SessionSplit out;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& ids = by_class[c];
    if (ids.size() < 2) {
      throw Error(ErrorCode::SingleClassDataset,
                  fmt::format("class {} has {} session(s); need at least 2", to_string(static_cast<Label>(c)), ids.size()));
    }
    const CounterRng stream(derive_seed(seed, 0x5917 + c));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[stream.bits(i) % i]);
    const double n = static_cast<double>(ids.size());
    std::size_t n_test = static_cast<std::size_t>(std::llround(split.test * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(split.val * n));
    if (ids.size() >= 3) {
      n_test = std::max<std::size_t>(n_test, 1);
      n_val = std::max<std::size_t>(n_val, 1);
    }
    while (n_test + n_val >= ids.size() && (n_test > 0 || n_val > 0)) {
      if (n_test >= n_val && n_test > 0) --n_test; else --n_val;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto& bucket = i < n_test ? out.test : (i < n_test + n_val ? out.val : out.train);
      bucket.push_back(ids[i]);
    }
  }
  return out;
}

namespace {

std::vector<TrainingSample> load_samples(const FeatureStore& store, const std::vector<std::string>& sessions,
                                         unsigned threads) {
  const std::set<std::string> wanted(sessions.begin(), sessions.end());
  std::vector<const FeatureEntry*> picked;
  for (const auto& e : store.segments)
    if (wanted.count(e.session_id)) picked.push_back(&e);
  std::vector<TrainingSample> out(picked.size());
  parallel_for(picked.size(), threads, [&](std::size_t i) {
    out[i] = {acf_to_model_input(read_acf_binary(picked[i]->path)), class_index(picked[i]->label),
              picked[i]->session_id};
  });
  return out;
}

}  // namespace

TrainSummary cmd_train(const fs::path& features_dir, const PipelineConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const FeatureStore store = FeatureStore::load(features_dir);
  const SessionSplit split = split_sessions(store, cfg.split, cfg.seed);
  make_dirs(out_dir);

  const auto training = load_samples(store, split.train, cfg.threads);
  const auto validation = load_samples(store, split.val, cfg.threads);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  spdlog::info("training on {} segments ({} sessions), validating on {} segments ({} sessions)", training.size(),
               split.train.size(), validation.size(), split.val.size());
  const TrainResult result = train(cfg.model, tc, training, validation);

  TrainSummary summary;
  summary.checkpoint = out_dir / "model.segn";
  summary.log = out_dir / "train_log.csv";
  summary.split = out_dir / "split.json";
  summary.epochs_run = result.log.size();
  summary.best_epoch = result.best_epoch;
  summary.stopped_early = result.stopped_early;
  summary.best_val_uar = result.log.at(result.best_epoch - 1).val_uar;
  save_checkpoint(result.params, summary.checkpoint);
  write_training_log(result.log, summary.log);
  write_json_file(split.to_json(), summary.split);
  spdlog::info("best epoch {} of {} (val UAR {:.4f}){}", summary.best_epoch, summary.epochs_run, summary.best_val_uar,
               summary.stopped_early ? ", stopped early" : "");
  return summary;
}

ClassTheoryCheck pv_theory_check(double segment_recall, const std::vector<std::size_t>& segments_per_session,
                                 std::size_t observed_correct, std::uint64_t seed, std::size_t replicas) {
  ClassTheoryCheck check;
  check.segment_recall = segment_recall;
  check.sessions = segments_per_session.size();
  if (check.sessions == 0) return check;
  const double n = static_cast<double>(check.sessions);
  check.observed_session_recall = static_cast<double>(observed_correct) / n;
  double expected = 0.0;
  for (auto segs : segments_per_session) expected += exact_pv_recall({segment_recall, segs});
  check.expected_session_recall = expected / n;

  std::vector<double> simulated(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    std::size_t correct = 0;
    for (std::size_t s = 0; s < check.sessions; ++s) {
      const CounterRng stream(derive_seed(seed, r * check.sessions + s));
      const std::size_t segs = segments_per_session[s];
      std::size_t hits = 0;
      for (std::size_t i = 0; i < segs; ++i) hits += stream.uniform(i) < segment_recall;
      if (2 * hits > segs) ++correct;
      else if (2 * hits == segs) correct += stream.bits(segs) >> 63;
    }
    simulated[r] = static_cast<double>(correct) / n;
  }
  std::sort(simulated.begin(), simulated.end());
  auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(replicas - 1)));
    return simulated[idx];
  };
  check.mc_interval = {quantile(0.025), quantile(0.975)};
  check.consistent = check.observed_session_recall >= check.mc_interval.low - 1e-12 &&
                     check.observed_session_recall <= check.mc_interval.high + 1e-12;
  return check;
}

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["policy"] = to_string(policy);
  j["segment"] = acfkit::to_json(segment);
  j["session"] = acfkit::to_json(session);
  ordered_json theory_json;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& t = theory[c];
    theory_json[to_string(static_cast<Label>(c))] = {{"segment_recall", t.segment_recall},
                                                     {"sessions", t.sessions},
                                                     {"observed_session_recall", t.observed_session_recall},
                                                     {"expected_session_recall", t.expected_session_recall},
                                                     {"mc_low", t.mc_interval.low},
                                                     {"mc_high", t.mc_interval.high},
                                                     {"consistent", t.consistent}};
  }
  j["pv_theory"] = theory_json;
  j["table"] = format_metrics_table({{"segment", segment}, {"session", session}});
  return j;
}

EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& features_dir, const fs::path& split_file,
                    const PipelineConfig& cfg) {
  const ModelParams params = load_checkpoint(checkpoint);
  const FeatureStore store = FeatureStore::load(features_dir);
  if (!fs::exists(split_file)) throw Error(ErrorCode::MissingSplit, "split file not found: " + split_file.string());
  const SessionSplit split = SessionSplit::from_json(read_json_file(split_file));
  if (split.test.empty()) throw Error(ErrorCode::MissingSplit, "test split is empty");

  const auto samples = load_samples(store, split.test, cfg.threads);
  if (samples.empty()) throw Error(ErrorCode::MissingSplit, "no test segments found in the feature store");
  const auto evaluation = evaluate_batch(params, samples, {1.0, 1.0}, cfg.threads);

  std::vector<int> seg_labels, seg_preds;
  std::vector<double> seg_scores;
  std::map<std::string, std::vector<std::size_t>> by_session;
  std::vector<std::string> session_order;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = evaluation.probs[i];
    seg_labels.push_back(samples[i].label);
    seg_preds.push_back(p[0] >= p[1] ? 0 : 1);
    seg_scores.push_back(p[0]);
    auto& bucket = by_session[samples[i].session_id];
    if (bucket.empty()) session_order.push_back(samples[i].session_id);
    bucket.push_back(i);
  }

  EvalReport report;
  report.policy = cfg.aggregation;
  report.segment = evaluate_predictions(seg_labels, seg_preds, seg_scores);

  std::vector<int> sess_labels, sess_preds;
  std::vector<double> sess_scores;
  std::array<std::vector<std::size_t>, 2> seg_counts;
  std::array<std::size_t, 2> sess_correct{};
  for (std::size_t s = 0; s < session_order.size(); ++s) {
    const auto& idx = by_session[session_order[s]];
    std::vector<std::vector<double>> probs;
    double score = 0.0;
    for (auto i : idx) {
      probs.push_back(evaluation.probs[i]);
      score += cfg.aggregation == AggregationPolicy::plurality_vote ? (seg_preds[i] == 0 ? 1.0 : 0.0)
                                                                    : evaluation.probs[i][0];
    }
    const int label = samples[idx.front()].label;
    const int decision = aggregate_session(probs, cfg.aggregation, derive_seed(cfg.seed, s));
    sess_labels.push_back(label);
    sess_preds.push_back(decision);
    sess_scores.push_back(score / static_cast<double>(idx.size()));
    seg_counts[static_cast<std::size_t>(label)].push_back(idx.size());
    sess_correct[static_cast<std::size_t>(label)] += decision == label;
  }
  report.session = evaluate_predictions(sess_labels, sess_preds, sess_scores);

  const std::array<double, 2> seg_recall{report.segment.recall_depressed, report.segment.recall_not_depressed};
  for (std::size_t c = 0; c < 2; ++c) {
    report.theory[c] = pv_theory_check(seg_recall[c], seg_counts[c], sess_correct[c], derive_seed(cfg.seed, 0x7E0 + c));
  }
  return report;
}

VoteMode vote_mode_from_string(const std::string& text) {
  if (text == "exact") return VoteMode::exact;
  if (text == "brute") return VoteMode::brute;
  if (text == "simulate") return VoteMode::simulate;
  if (text == "check") return VoteMode::check;
  throw Error(ErrorCode::InvalidArgument, "unknown vote mode '" + text + "'");
}

VoteOutcome cmd_vote(const VoteCommand& command) {
  VoteOutcome outcome;
  if (command.mode != VoteMode::check) {
    const VoteParams params{command.p0, command.n};
    params.validate();
    ordered_json r;
    r["p0"] = command.p0;
    r["N"] = command.n;
    r["exact"] = exact_pv_recall(params);
    r["brute_force"] = nullptr;
    r["margin"] = theorem_margin(params);
    r["mc_estimate"] = nullptr;
    r["ci_low"] = nullptr;
    r["ci_high"] = nullptr;
    if (command.mode == VoteMode::brute) r["brute_force"] = brute_force_pv_recall(params);
    if (command.mode == VoteMode::simulate) {
      const auto est = monte_carlo_session_eval(params, command.trials, command.seed, command.threads);
      r["mc_estimate"] = est.recall;
      r["ci_low"] = est.ci.low;
      r["ci_high"] = est.ci.high;
      r["trials"] = est.trials;
    }
    outcome.report = std::move(r);
    return outcome;
  }

  constexpr double kTolerance = 1e-12;
  double min_margin = 1.0;
  std::size_t checked = 0;
  ordered_json violations = ordered_json::array();
  for (int k = 50; k <= 100; ++k) {
    const double p0 = k / 100.0;
    for (std::size_t n = 1; n <= 50; ++n) {
      const double margin = theorem_margin({p0, n});
      ++checked;
      min_margin = std::min(min_margin, margin);
      if (margin < -kTolerance) violations.push_back({{"p0", p0}, {"N", n}, {"margin", margin}});
    }
  }
  std::vector<std::size_t> odd_n;
  for (std::size_t n = 1; n <= 49; n += 2) odd_n.push_back(n);
  bool monotone = true;
  ordered_json curves = ordered_json::array();
  for (double p0 : {0.55, 0.6, 0.7, 0.8, 0.9}) {
    const auto recall = jury_limit_check(p0, odd_n);
    for (std::size_t i = 1; i < recall.size(); ++i) monotone = monotone && recall[i] >= recall[i - 1] - kTolerance;
    curves.push_back({{"p0", p0}, {"n", odd_n}, {"recall", recall}});
  }
  outcome.theorem_holds = violations.empty() && monotone;
  ordered_json r;
  r["mode"] = "check";
  r["grid"] = {{"p0_min", 0.5}, {"p0_max", 1.0}, {"p0_step", 0.01}, {"n_min", 1}, {"n_max", 50}};
  r["checked"] = checked;
  r["tolerance"] = kTolerance;
  r["min_margin"] = min_margin;
  r["violations"] = std::move(violations);
  r["monotone_odd_n"] = monotone;
  r["theorem_holds"] = outcome.theorem_holds;
  r["curves"] = std::move(curves);
  outcome.report = std::move(r);
  return outcome;
}

}  // namespace acfkit
