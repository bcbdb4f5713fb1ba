#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace acfkit {

// Segment-level recall p0 of the true class (p1 = 1 - p0) and the number of
// segments N in a session.
struct VoteParams {
  double p0 = 0.5;
  std::size_t n_segments = 1;

  void validate() const;
};

// Binary segment decisions (class indices 0 or 1) for one session.
struct SessionVote {
  std::vector<int> segment_predictions;
  std::uint64_t tie_break_seed = 0;
};

inline constexpr std::size_t kMaxBruteForceSegments = 24;

/// Plurality vote; an exact tie is settled by a fair coin derived from the seed.
int pv_decide(const SessionVote& vote);

/// Session recall of plurality voting over N independent segments:
/// sum_{k >= N/2} C(N,k) d(k) p0^k p1^(N-k), d(N/2) = 1/2, exact binomials.
double exact_pv_recall(const VoteParams& params);

/// Same quantity by summing all 2^N outcome vectors (N <= 24).
double brute_force_pv_recall(const VoteParams& params);

/// exact_pv_recall - p0.
double theorem_margin(const VoteParams& params);

/// Session recall along a grid of (odd) segment counts for a fixed p0 > 0.5.
std::vector<double> jury_limit_check(double p0, std::span<const std::size_t> n_grid);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for a binomial proportion (default 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct McEstimate {
  std::size_t trials = 0;
  std::size_t successes = 0;
  double recall = 0.0;
  Interval ci;
};

/// Simulates `trials` sessions of N iid Bernoulli(p0) segment outcomes and
/// plurality-votes each. Trial t draws from its own counter stream, so the
/// estimate does not depend on the thread count.
McEstimate monte_carlo_session_eval(const VoteParams& params, std::size_t trials, std::uint64_t seed,
                                    unsigned threads = 1);

enum class AggregationPolicy { plurality_vote, mean_prob };

std::string to_string(AggregationPolicy policy);
AggregationPolicy aggregation_policy_from_string(const std::string& text);

/// Session decision from per-segment class probabilities.
int aggregate_session(const std::vector<std::vector<double>>& segment_probs, AggregationPolicy policy,
                      std::uint64_t tie_break_seed = 0);

}  // namespace acfkit
