#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "acfkit/error.hpp"
#include "acfkit/pipeline.hpp"
#include "acfkit/series_io.hpp"

using namespace acfkit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("acfkit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Empty;
}

MultiChannelSeries noise_series(std::size_t frames, std::uint64_t seed, std::size_t channels = 2) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  Matrix m(channels, frames);
  for (auto& v : m.data()) v = n(gen);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < channels; ++i) names.push_back("tv" + std::to_string(i));
  return {names, 100.0, m};
}

// Small corpus and model that train in well under a second.
PipelineConfig small_config() {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.synth.sessions = {5, 5};
  cfg.synth.duration_range_s = {22.0, 35.0};
  cfg.acf.max_delay_frames = 20;
  cfg.model.dilations = {1, 3};
  cfg.model.parallel_kernel = 3;
  cfg.model.parallel_filters = 2;
  cfg.model.seq_filters = {2, 2};
  cfg.model.dense_units = {4, 3};
  cfg.train.max_epochs = 3;
  cfg.train.patience_epochs = 3;
  return cfg;
}

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "acfkit_cli_stdout.txt", err = dir / "acfkit_cli_stderr.txt";
  const std::string cmd = std::string(ACFKIT_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
  auto cfg = PipelineConfig::defaults();
  cfg.validate();
  EXPECT_EQ(cfg.seed, 1729u);
  auto back = pipeline_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
}

TEST(Config, RejectsUnknownKeysAndBadVersion) {
  EXPECT_EQ(code_of([] { pipeline_config_from_json(nlohmann::json::parse(R"({"sead": 3})")); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { pipeline_config_from_json(nlohmann::json::parse(R"({"model": {"filters": 3}})")); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { pipeline_config_from_json(nlohmann::json::parse(R"({"schema_version": 9})")); }),
            ErrorCode::ConfigError);
}

TEST(Config, SeedPropagatesToTraining) {
  auto cfg = pipeline_config_from_json(nlohmann::json::parse(R"({"seed": 42})"));
  EXPECT_EQ(cfg.train.seed, 42u);
  EXPECT_EQ(code_of([] { pipeline_config_from_json(nlohmann::json::parse(R"({"seed": 42, "train": {"seed": 7}})")); }),
            ErrorCode::ConfigError);
}

TEST(Config, ParseErrorNamesTheLine) {
  try {
    parse_json_with_lines("{\n  \"seed\": 1,\n  \"x\": ]\n}", "cfg.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Synth, DefaultCorpusIsBalancedAndReproducible) {
  auto cfg = PipelineConfig::defaults();
  cfg.synth.duration_range_s = {12.0, 15.0};
  const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  const auto manifest = cmd_synth(cfg, a);
  cmd_synth(cfg, b);
  auto entries = read_manifest(manifest);
  ASSERT_EQ(entries.size(), 20u);
  std::size_t depressed = 0;
  for (const auto& e : entries) {
    depressed += hamd_label(e.hamd) == Label::depressed;
    EXPECT_EQ(slurp(e.csv_path), slurp(b / "sessions" / (e.session_id + ".csv")));
  }
  EXPECT_EQ(depressed, 10u);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
}

TEST(Synth, UnwritableDirectoryIsIoError) {
  const auto dir = fresh_dir("synth_bad");
  std::ofstream(dir / "file") << "x";
  try {
    cmd_synth(PipelineConfig::defaults(), dir / "file" / "sub");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
    EXPECT_NE(std::string(e.what()).find("file"), std::string::npos);
  }
}

TEST(Extract, SegmentCountsAndSkips) {
  const auto dir = fresh_dir("extract");
  write_series_csv(noise_series(4500, 1), dir / "long.csv");
  write_series_csv(noise_series(800, 2), dir / "short.csv");
  Matrix flat(2, 1500, 1.0);
  write_series_csv(MultiChannelSeries({"tv0", "tv1"}, 100.0, flat), dir / "flat.csv");
  write_manifest({{"L", "long.csv", 12}, {"S", "short.csv", 3}, {"F", "flat.csv", 2}}, dir / "manifest.json");
  auto store = cmd_extract(dir / "manifest.json", PipelineConfig::defaults(), dir / "feat", {true});
  EXPECT_EQ(store.segments.size(), 6u);
  for (const auto& s : store.segments) {
    EXPECT_EQ(s.session_id, "L");
    EXPECT_EQ(s.label, Label::depressed);
    EXPECT_TRUE(fs::exists(s.path));
    EXPECT_EQ(s.frames, 2000u);
  }
  ASSERT_EQ(store.skipped.size(), 2u);
  EXPECT_EQ(store.skipped[0].session_id, "S");
  EXPECT_EQ(store.skipped[1].session_id, "F");
  EXPECT_NE(store.skipped[1].reason.find("ConstantChannel"), std::string::npos);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "feat" / "acf")) files += e.path().extension() == ".acf";
  EXPECT_EQ(files, 6u);

  auto loaded = FeatureStore::load(dir / "feat");
  EXPECT_EQ(loaded.segments.size(), 6u);
  EXPECT_EQ(loaded.channels, 2u);
  EXPECT_EQ(loaded.segments[3].start_frame, 1500u);
}

TEST(Extract, FastAndNaiveAgreeDownstream) {
  auto cfg = small_config();
  const auto dir = fresh_dir("fast_naive");
  const auto manifest = cmd_synth(cfg, dir);
  std::array<nlohmann::ordered_json, 2> reports;
  for (int k = 0; k < 2; ++k) {
    cfg.acf_method = k == 0 ? AcfMethod::fast : AcfMethod::naive;
    const auto sub = dir / (k == 0 ? "fast" : "naive");
    cmd_extract(manifest, cfg, sub / "feat");
    auto summary = cmd_train(sub / "feat", cfg, sub / "model");
    reports[k] = cmd_eval(summary.checkpoint, sub / "feat", summary.split, cfg).to_json();
  }
  for (const char* level : {"segment", "session"}) {
    for (const char* key : {"auc_roc", "uar", "f1_depressed", "f1_not_depressed"}) {
      EXPECT_NEAR(reports[0][level][key].get<double>(), reports[1][level][key].get<double>(), 1e-9)
          << level << "." << key;
    }
  }
}

TEST(Split, SessionDisjointAndStratified) {
  auto cfg = small_config();
  cfg.synth.sessions = {10, 10};
  const auto dir = fresh_dir("split");
  auto store = cmd_extract(cmd_synth(cfg, dir), cfg, dir / "feat");
  auto split = split_sessions(store, cfg.split, cfg.seed);
  std::set<std::string> seen;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    EXPECT_FALSE(part->empty());
    for (const auto& id : *part) EXPECT_TRUE(seen.insert(id).second) << id;
  }
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(split.train.size(), 12u);
  EXPECT_EQ(split.test.size(), 4u);
  auto again = split_sessions(store, cfg.split, cfg.seed);
  EXPECT_EQ(again.test, split.test);
}

TEST(Train, NeedsTwoSessionsPerClass) {
  auto cfg = small_config();
  cfg.synth.sessions = {3, 1};
  const auto dir = fresh_dir("single");
  cmd_extract(cmd_synth(cfg, dir), cfg, dir / "feat");
  EXPECT_EQ(code_of([&] { cmd_train(dir / "feat", cfg, dir / "model"); }), ErrorCode::SingleClassDataset);
}

TEST(Eval, EmptyTestSplitIsMissingSplit) {
  auto cfg = small_config();
  const auto dir = fresh_dir("missing_split");
  cmd_extract(cmd_synth(cfg, dir), cfg, dir / "feat");
  auto summary = cmd_train(dir / "feat", cfg, dir / "model");
  SessionSplit empty;
  write_json_file(empty.to_json(), dir / "empty_split.json");
  EXPECT_EQ(code_of([&] { cmd_eval(summary.checkpoint, dir / "feat", dir / "empty_split.json", cfg); }),
            ErrorCode::MissingSplit);
  EXPECT_EQ(code_of([&] { cmd_eval(summary.checkpoint, dir / "feat", dir / "nope.json", cfg); }),
            ErrorCode::MissingSplit);
}

TEST(Eval, UnanimousCorrectSegmentsGivePerfectSessions) {
  std::vector<int> labels, preds;
  std::vector<double> scores;
  for (int s = 0; s < 6; ++s) {
    const int label = s % 2;
    std::vector<std::vector<double>> probs(5, label == 0 ? std::vector<double>{0.8, 0.2} : std::vector<double>{0.3, 0.7});
    labels.push_back(label);
    preds.push_back(aggregate_session(probs, AggregationPolicy::plurality_vote, s));
    scores.push_back(label == 0 ? 1.0 : 0.0);
  }
  auto r = evaluate_predictions(labels, preds, scores);
  EXPECT_EQ(r.uar, 1.0);
  EXPECT_EQ(r.auc_roc, 1.0);
}

TEST(TheoryCheck, BandContainsExpectation) {
  const std::vector<std::size_t> counts{5, 7, 9, 6, 8, 10, 5, 7};
  auto c = pv_theory_check(0.7, counts, 7, 3, 5000);
  EXPECT_LE(c.mc_interval.low, c.expected_session_recall);
  EXPECT_GE(c.mc_interval.high, c.expected_session_recall);
  EXPECT_TRUE(c.consistent);
  EXPECT_FALSE(pv_theory_check(0.95, counts, 0, 3, 5000).consistent);
}

TEST(Vote, Reports) {
  auto exact = cmd_vote({VoteMode::exact, 0.6, 3});
  EXPECT_NEAR(exact.report["exact"].get<double>(), 0.648, 1e-12);
  EXPECT_TRUE(exact.report["brute_force"].is_null());
  auto brute = cmd_vote({VoteMode::brute, 0.6, 3});
  EXPECT_NEAR(brute.report["brute_force"].get<double>(), 0.648, 1e-12);
  auto sim = cmd_vote({VoteMode::simulate, 0.6, 3, 100000});
  EXPECT_NEAR(sim.report["mc_estimate"].get<double>(), 0.648, 0.005);
  EXPECT_EQ(code_of([] { cmd_vote({VoteMode::brute, 0.6, 30}); }), ErrorCode::TooManySegments);
  auto check = cmd_vote({VoteMode::check});
  EXPECT_TRUE(check.theorem_holds);
  EXPECT_EQ(check.report["checked"].get<std::size_t>(), 51u * 50u);
  EXPECT_TRUE(check.report["violations"].empty());
}

TEST(Plot, RocAndRecallCharts) {
  const auto dir = fresh_dir("plot");
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
  auto perfect = evaluate_predictions(labels, std::vector<int>{0, 0, 1, 1}, scores);
  EvalReport report;
  report.segment = perfect;
  report.session = perfect;
  write_json_file(report.to_json(), dir / "metrics.json");
  write_json_file(cmd_vote({VoteMode::check}).report, dir / "check.json");
  auto files = cmd_plot({dir / "metrics.json", dir / "check.json"}, dir / "svg");
  ASSERT_EQ(files.size(), 2u);
  const auto roc = slurp(files[0]);
  EXPECT_NE(roc.find("<svg"), std::string::npos);
  EXPECT_NE(roc.find("60.00,40.00"), std::string::npos);  // (fpr 0, tpr 1) corner
  EXPECT_NE(slurp(files[1]).find("p0 = 0.6"), std::string::npos);

  std::ofstream(dir / "broken.json") << "{\n\"segment\": [1,\n";
  try {
    cmd_plot({dir / "broken.json"}, dir / "svg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
}

TEST(Cli, VoteCommandsAndExitCodes) {
  auto exact = run_cli("vote exact --p0 0.6 --n 3");
  EXPECT_EQ(exact.exit_code, 0) << exact.err;
  EXPECT_EQ(nlohmann::json::parse(exact.out)["exact"].get<double>(), exact_pv_recall({0.6, 3}));
  auto check = run_cli("vote check");
  EXPECT_EQ(check.exit_code, 0) << check.err;
  auto brute = run_cli("vote brute --n 30");
  EXPECT_EQ(brute.exit_code, 2);
  EXPECT_EQ(nlohmann::json::parse(brute.err)["error"], "TooManySegments");
}

TEST(Cli, ErrorsAreMachineReadable) {
  const auto dir = fresh_dir("cli");
  std::ofstream(dir / "bad.json") << "{\"unknown\": 1}";
  auto bad_cfg = run_cli("--config " + (dir / "bad.json").string() + " vote exact");
  EXPECT_EQ(bad_cfg.exit_code, 2);
  EXPECT_EQ(nlohmann::json::parse(bad_cfg.err)["error"], "ConfigError");
  auto missing = run_cli("extract --manifest " + (dir / "none.json").string() + " --out " + dir.string());
  EXPECT_EQ(missing.exit_code, 3);
  EXPECT_EQ(nlohmann::json::parse(missing.err)["error"], "IoError");
  auto bad_flag = run_cli("vote exact --p0");
  EXPECT_EQ(bad_flag.exit_code, 2);
}
