#include "irislab/core.hpp"

#include <algorithm>
#include <cmath>

namespace irislab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

CategoricalDist::CategoricalDist(std::vector<double> probs, std::vector<TokenId> active_ids)
    : probs_(std::move(probs)), active_ids_(std::move(active_ids)) {
  if (probs_.empty()) throw std::invalid_argument("empty active set");
  if (probs_.size() != active_ids_.size()) {
    throw std::invalid_argument("probs and active_ids differ in length");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probabilities must be strictly positive and finite");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to 1");
}

CategoricalDist CategoricalDist::uniform(std::vector<TokenId> active_ids) {
  std::vector<double> probs(active_ids.size(), 1.0 / static_cast<double>(active_ids.size()));
  return CategoricalDist(std::move(probs), std::move(active_ids));
}

int CategoricalDist::index_of(TokenId id) const {
  auto it = std::find(active_ids_.begin(), active_ids_.end(), id);
  return it == active_ids_.end() ? -1 : static_cast<int>(it - active_ids_.begin());
}

double CategoricalDist::prob_of(TokenId id) const {
  int i = index_of(id);
  return i < 0 ? 0.0 : probs_[static_cast<std::size_t>(i)];
}

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

CategoricalDist masked_softmax(std::span<const double> logits, std::span<const TokenId> active_ids) {
  if (active_ids.empty()) throw std::invalid_argument("empty active set");
  double max_logit = -INFINITY;
  for (TokenId id : active_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= logits.size()) {
      throw std::out_of_range("active id outside the vocabulary");
    }
    double z = logits[static_cast<std::size_t>(id)];
    if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
    max_logit = std::max(max_logit, z);
  }
  std::vector<double> probs(active_ids.size());
  double total = 0.0;
  for (std::size_t i = 0; i < active_ids.size(); ++i) {
    probs[i] = std::exp(logits[static_cast<std::size_t>(active_ids[i])] - max_logit);
    total += probs[i];
  }
  for (double& p : probs) p = std::max(p / total, kProbFloor);
  return CategoricalDist(std::move(probs), {active_ids.begin(), active_ids.end()});
}

double kl_divergence(const CategoricalDist& p, const CategoricalDist& q) {
  if (p.active_ids() != q.active_ids()) throw std::invalid_argument("support mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * (safe_log(p[i]) - safe_log(q[i]));
  return std::max(kl, 0.0);
}

double entropy(const CategoricalDist& p) {
  double h = 0.0;
  for (double pi : p.probs()) h -= pi * safe_log(pi);
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::key() const { return mix64(seed ^ mix64(stream_id + kGolden)); }

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id) { return RngStream{seed, stream_id}; }

RngStream purpose_stream(std::uint64_t seed, StreamPurpose purpose) {
  return derive_stream(seed, static_cast<std::uint64_t>(purpose));
}

std::uint64_t RngDraws::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngDraws::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngDraws::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

TokenId RngDraws::sample(const CategoricalDist& dist) {
  const double u = uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    cumulative += dist[i];
    if (u < cumulative) return dist.active_ids()[i];
  }
  return dist.active_ids().back();
}

}  // namespace irislab
