#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "irislab/domain.hpp"

namespace irislab {

struct TokenRecord {
  TokenId id;
  Segment segment;
  bool forced = false;  // structural token emitted without a policy decision
  bool operator==(const TokenRecord&) const = default;
};

/// One sampled output: optional CoT text, exactly one <BOI>, then 64 image
/// tokens. Per-token vectors are indexed over non-forced ("scored") tokens.
struct Trajectory {
  Prompt prompt;
  std::vector<TokenRecord> tokens;
  std::vector<double> behavior_log_probs;
  std::vector<double> token_sc;          // -KL(U || pi) at each scored token
  std::vector<double> token_entropy_gap;  // H(pi) - ln V at each scored token
  double intrinsic_return = 0.0;
  std::optional<double> oracle_score;
  std::uint64_t snapshot_hash = 0;  // hash of the parameters that sampled it

  // Indices into `tokens` of the scored positions, in order.
  std::vector<std::size_t> scored_positions() const;
  std::size_t scored_count() const;
  std::vector<TokenId> image_tokens() const;
  std::vector<TokenId> text_tokens() const;  // sampled text words, excluding <BOI>
  bool operator==(const Trajectory&) const = default;
};

// Throws std::invalid_argument("segment violation") unless tokens follow
// text*, <BOI>, 64 image tokens with consistent segment tags.
void validate_structure(const Trajectory& t);

struct TrajectoryGroup {
  Prompt prompt;
  std::vector<Trajectory> members;
  std::vector<double> advantages;
  bool degenerate = false;
  std::uint64_t snapshot_hash = 0;
};

}  // namespace irislab
