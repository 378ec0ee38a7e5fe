#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace irislab {

using TokenId = int;

// Floor applied to probabilities before any logarithm.
inline constexpr double kProbFloor = 1e-300;

// Probability vector over an ordered subset of the vocabulary.
class CategoricalDist {
 public:
  CategoricalDist() = default;
  // Validates the invariants: equal lengths, strictly positive, sums to 1.
  CategoricalDist(std::vector<double> probs, std::vector<TokenId> active_ids);

  static CategoricalDist uniform(std::vector<TokenId> active_ids);

  const std::vector<double>& probs() const { return probs_; }
  const std::vector<TokenId>& active_ids() const { return active_ids_; }
  std::size_t size() const { return probs_.size(); }

  double operator[](std::size_t i) const { return probs_[i]; }
  // Probability of a vocabulary id; zero when the id is outside the active set.
  double prob_of(TokenId id) const;
  // Position of `id` within active_ids, or -1.
  int index_of(TokenId id) const;

 private:
  std::vector<double> probs_;
  std::vector<TokenId> active_ids_;
};

double safe_log(double p);

// Softmax of `logits[active_ids]` with max-subtraction. Inactive ids carry no mass.
CategoricalDist masked_softmax(std::span<const double> logits, std::span<const TokenId> active_ids);

// KL(p || q) in nats. Both must share identical active_ids.
double kl_divergence(const CategoricalDist& p, const CategoricalDist& q);

// Shannon entropy in nats.
double entropy(const CategoricalDist& p);

// SplitMix64 finalizer; the mixing function behind every derived stream.
std::uint64_t mix64(std::uint64_t x);

/// Immutable descriptor of a reproducible random stream.
///
/// Construction rule: key = mix64(seed ^ mix64(stream_id + 0x9E3779B97F4A7C15)).
/// Draw n (n = 0, 1, ...) is mix64(key + (n + 1) * 0x9E3779B97F4A7C15), i.e. a
/// SplitMix64 sequence started at `key`. Nested streams are derived by using a
/// parent's key as the child's seed, so any path of ids maps to a fixed stream
/// regardless of which thread consumes it.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  std::uint64_t key() const;
  RngStream derive(std::uint64_t child_id) const { return RngStream{key(), child_id}; }
};

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id);

// Purpose tags for the first level of stream derivation below a run seed.
enum class StreamPurpose : std::uint64_t {
  kInit = 1,
  kPrompts = 2,
  kRollout = 3,
  kEval = 4,
  kGradCheck = 5,
};

RngStream purpose_stream(std::uint64_t seed, StreamPurpose purpose);

// Caller-local draw state over an RngStream.
class RngDraws {
 public:
  explicit RngDraws(const RngStream& stream) : state_(stream.key()) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Inverse-CDF draw from a categorical; returns the vocabulary id.
  TokenId sample(const CategoricalDist& dist);

 private:
  std::uint64_t state_;
};

}  // namespace irislab
