#include "acfkit/vote.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "acfkit/error.hpp"
#include "acfkit/parallel.hpp"
#include "acfkit/rng.hpp"

namespace acfkit {

namespace {

// Decision for k votes of class 0 out of n, with tie mass 1/2.
constexpr double class0_mass(std::size_t k, std::size_t n) {
  if (2 * k > n) return 1.0;
  if (2 * k == n) return 0.5;
  return 0.0;
}

std::size_t argmax(const std::vector<double>& probs) {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace

void VoteParams::validate() const {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("p0 {} outside [0, 1]", p0));
  if (n_segments < 1) throw Error(ErrorCode::InvalidArgument, "a session needs at least one segment");
}

int pv_decide(const SessionVote& vote) {
  if (vote.segment_predictions.empty()) throw Error(ErrorCode::EmptyVote, "no segment predictions to vote on");
  std::size_t zeros = 0;
  for (int c : vote.segment_predictions) {
    if (c != 0 && c != 1) throw Error(ErrorCode::InvalidArgument, fmt::format("class index {} is not binary", c));
    zeros += c == 0;
  }
  const std::size_t ones = vote.segment_predictions.size() - zeros;
  if (zeros != ones) return zeros > ones ? 0 : 1;
  return static_cast<int>(mix64(vote.tie_break_seed) >> 63);
}

double exact_pv_recall(const VoteParams& params) {
  params.validate();
  using boost::multiprecision::cpp_int;
  const std::size_t n = params.n_segments;
  const long double p = params.p0;
  const long double q = 1.0L - p;
  long double total = 0.0L;
  cpp_int binom = 1;  // C(n, k), advanced incrementally
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0) binom = binom * (n - k + 1) / k;
    if (2 * k < n) continue;
    const long double coeff = binom.convert_to<long double>() * class0_mass(k, n);
    total += coeff * std::pow(p, static_cast<long double>(k)) * std::pow(q, static_cast<long double>(n - k));
  }
  return static_cast<double>(std::clamp(total, 0.0L, 1.0L));
}

double brute_force_pv_recall(const VoteParams& params) {
  params.validate();
  const std::size_t n = params.n_segments;
  if (n > kMaxBruteForceSegments) {
    throw Error(ErrorCode::TooManySegments,
                fmt::format("brute force enumerates 2^N outcomes; N = {} exceeds {}", n, kMaxBruteForceSegments));
  }
  const double p = params.p0;
  const double q = 1.0 - p;
  double total = 0.0;
  const std::uint64_t outcomes = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
    // bit set = segment classified correctly as class 0
    const auto correct = static_cast<std::size_t>(std::popcount(mask));
    const double mass = class0_mass(correct, n);
    if (mass == 0.0) continue;
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) prob *= ((mask >> i) & 1U) ? p : q;
    total += mass * prob;
  }
  return total;
}

double theorem_margin(const VoteParams& params) { return exact_pv_recall(params) - params.p0; }

std::vector<double> jury_limit_check(double p0, std::span<const std::size_t> n_grid) {
  if (!(p0 > 0.5 && p0 <= 1.0)) throw Error(ErrorCode::InvalidArgument, "jury check needs 0.5 < p0 <= 1");
  std::vector<double> out;
  out.reserve(n_grid.size());
  for (std::size_t n : n_grid) {
    if (n % 2 == 0) throw Error(ErrorCode::InvalidArgument, fmt::format("jury check grid needs odd N, got {}", n));
    out.push_back(exact_pv_recall({p0, n}));
  }
  return out;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

McEstimate monte_carlo_session_eval(const VoteParams& params, std::size_t trials, std::uint64_t seed,
                                    unsigned threads) {
  params.validate();
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "Monte-Carlo needs at least one trial");
  const std::size_t n = params.n_segments;
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<std::size_t> hits(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(trials, (c + 1) * kChunk);
    std::size_t local = 0;
    for (std::size_t t = c * kChunk; t < end; ++t) {
      const CounterRng stream(derive_seed(seed, t));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) correct += stream.uniform(i) < params.p0;
      if (2 * correct > n) {
        ++local;
      } else if (2 * correct == n) {
        local += stream.bits(n) >> 63;
      }
    }
    hits[c] = local;
  });
  McEstimate est;
  est.trials = trials;
  for (std::size_t h : hits) est.successes += h;
  est.recall = static_cast<double>(est.successes) / static_cast<double>(trials);
  est.ci = wilson_interval(est.successes, trials);
  return est;
}

std::string to_string(AggregationPolicy policy) {
  return policy == AggregationPolicy::plurality_vote ? "pv" : "mean_prob";
}

AggregationPolicy aggregation_policy_from_string(const std::string& text) {
  if (text == "pv" || text == "plurality_vote") return AggregationPolicy::plurality_vote;
  if (text == "mean_prob" || text == "mean-prob") return AggregationPolicy::mean_prob;
  throw Error(ErrorCode::ConfigError, "unknown aggregation policy '" + text + "' (expected pv or mean_prob)");
}

int aggregate_session(const std::vector<std::vector<double>>& segment_probs, AggregationPolicy policy,
                      std::uint64_t tie_break_seed) {
  if (segment_probs.empty()) throw Error(ErrorCode::EmptyVote, "session has no segments");
  const std::size_t classes = segment_probs.front().size();
  if (classes != 2) throw Error(ErrorCode::ShapeMismatch, "session aggregation is binary");
  for (const auto& p : segment_probs) {
    if (p.size() != classes) throw Error(ErrorCode::ShapeMismatch, "segments disagree on class count");
  }
  if (policy == AggregationPolicy::plurality_vote) {
    SessionVote vote{{}, tie_break_seed};
    vote.segment_predictions.reserve(segment_probs.size());
    for (const auto& p : segment_probs) vote.segment_predictions.push_back(static_cast<int>(argmax(p)));
    return pv_decide(vote);
  }
  std::vector<double> mean(classes, 0.0);
  for (const auto& p : segment_probs)
    for (std::size_t c = 0; c < classes; ++c) mean[c] += p[c];
  return static_cast<int>(argmax(mean));
}

}  // namespace acfkit
