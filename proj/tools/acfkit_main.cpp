// acfkit command-line front end.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "acfkit/error.hpp"
#include "acfkit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace acfkit;

namespace {

constexpr int kTheoremFailure = 4;

void report_error(std::string_view code, const std::string& message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  std::cerr << j.dump() << std::endl;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("acfkit");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("ACFKIT_LOG")) spdlog::cfg::helpers::load_levels(level);
}

fs::path require_path(const std::optional<std::string>& flag, const std::optional<std::string>& from_config,
                      const char* what) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  throw Error(ErrorCode::ConfigError, fmt::format("no {} given (flag or config paths)", what));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"acfkit: channel-delay correlation features, segment classifier and session voting"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, out_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<unsigned> threads_flag;
  app.add_option("--config", config_path, "JSON pipeline config");
  app.add_option("--seed", seed_flag, "global seed (default 1729)");
  app.add_option("--threads", threads_flag, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_flag, "output directory");

  auto* synth = app.add_subcommand("synth", "generate the synthetic labeled corpus");

  auto* extract = app.add_subcommand("extract", "standardize, segment and compute ACF features");
  std::optional<std::string> manifest_flag, method_flag;
  bool write_csv = false;
  extract->add_option("--manifest", manifest_flag, "manifest.json from synth");
  extract->add_option("--method", method_flag, "fast | naive");
  extract->add_flag("--csv", write_csv, "also write each ACF matrix as CSV");

  auto* train_cmd = app.add_subcommand("train", "train the segment classifier");
  std::optional<std::string> features_flag;
  train_cmd->add_option("--features", features_flag, "feature store directory");

  auto* eval = app.add_subcommand("eval", "segment and session metrics on the test split");
  std::optional<std::string> checkpoint_flag, split_flag, policy_flag;
  eval->add_option("--checkpoint", checkpoint_flag, "model.segn");
  eval->add_option("--features", features_flag, "feature store directory");
  eval->add_option("--split", split_flag, "split.json (default: next to the checkpoint)");
  eval->add_option("--policy", policy_flag, "pv | mean_prob");

  auto* vote = app.add_subcommand("vote", "plurality-vote theory");
  vote->require_subcommand(1);
  vote->fallthrough();
  VoteCommand vc;
  for (const char* mode : {"exact", "brute", "simulate", "check"}) {
    auto* sub = vote->add_subcommand(mode);
    sub->fallthrough();
    if (std::string_view(mode) != "check") {
      sub->add_option("--p0", vc.p0, "segment recall")->capture_default_str();
      sub->add_option("--n", vc.n, "segments per session")->capture_default_str();
    }
    if (std::string_view(mode) == "simulate") sub->add_option("--trials", vc.trials)->capture_default_str();
  }

  auto* plot = app.add_subcommand("plot", "render ROC / recall-vs-N charts as SVG");
  std::vector<std::string> plot_inputs;
  plot->add_option("inputs", plot_inputs, "eval or vote-check JSON reports")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(to_string(ErrorCode::ConfigError), e.what(), 2);
    return 2;
  }

  try {
    PipelineConfig cfg = config_path ? load_pipeline_config(*config_path) : PipelineConfig::defaults();
    if (seed_flag) cfg.propagate_seed(*seed_flag);
    if (threads_flag) cfg.threads = *threads_flag;
    if (method_flag) cfg.acf_method = acf_method_from_string(*method_flag);
    if (policy_flag) cfg.aggregation = aggregation_policy_from_string(*policy_flag);
    const fs::path out = out_flag ? fs::path(*out_flag) : fs::path(cfg.paths.out.value_or("."));

    if (*synth) {
      std::cout << cmd_synth(cfg, out).string() << '\n';
    } else if (*extract) {
      const auto store = cmd_extract(require_path(manifest_flag, cfg.paths.manifest, "manifest"), cfg, out, {write_csv});
      std::cout << fmt::format("{} segments, {} sessions skipped\n", store.segments.size(), store.skipped.size());
    } else if (*train_cmd) {
      const auto s = cmd_train(require_path(features_flag, cfg.paths.features, "feature store"), cfg, out);
      nlohmann::ordered_json j{{"checkpoint", s.checkpoint.string()},
                               {"log", s.log.string()},
                               {"split", s.split.string()},
                               {"epochs_run", s.epochs_run},
                               {"best_epoch", s.best_epoch},
                               {"stopped_early", s.stopped_early},
                               {"best_val_uar", s.best_val_uar}};
      std::cout << j.dump(2) << '\n';
    } else if (*eval) {
      const fs::path checkpoint = require_path(checkpoint_flag, cfg.paths.checkpoint, "checkpoint");
      const fs::path split = split_flag ? fs::path(*split_flag) : checkpoint.parent_path() / "split.json";
      const auto report = cmd_eval(checkpoint, require_path(features_flag, cfg.paths.features, "feature store"), split, cfg);
      const auto j = report.to_json();
      std::error_code ec;
      fs::create_directories(out, ec);
      write_json_file(j, out / "metrics.json");
      std::cout << j.at("table").get<std::string>();
    } else if (*vote) {
      for (auto* sub : vote->get_subcommands()) vc.mode = vote_mode_from_string(sub->get_name());
      vc.seed = cfg.seed;
      vc.threads = cfg.threads;
      const auto outcome = cmd_vote(vc);
      if (out_flag) {
        std::error_code ec;
        fs::create_directories(out, ec);
        write_json_file(outcome.report, out / fmt::format("vote_{}.json", vote->get_subcommands().front()->get_name()));
      }
      std::cout << outcome.report.dump(2) << '\n';
      if (!outcome.theorem_holds) {
        report_error("TheoremViolation", "plurality-vote recall fell below segment recall", kTheoremFailure);
        return kTheoremFailure;
      }
    } else if (*plot) {
      std::vector<fs::path> inputs(plot_inputs.begin(), plot_inputs.end());
      for (const auto& p : cmd_plot(inputs, out)) std::cout << p.string() << '\n';
    }
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(to_string(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what(), 3);
    return 3;
  }
  return 0;
}
