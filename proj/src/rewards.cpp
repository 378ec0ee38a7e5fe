#include "irislab/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace irislab {

std::string_view to_string(RewardMode m) {
  switch (m) {
    case RewardMode::kNSC: return "NSC";
    case RewardMode::kSC: return "SC";
    case RewardMode::kOff: return "OFF";
  }
  return "?";
}

std::string_view to_string(KlVariant v) { return v == KlVariant::kForward ? "forward_kl" : "backward_kl"; }

RewardMode parse_reward_mode(std::string_view s) {
  if (s == "NSC") return RewardMode::kNSC;
  if (s == "SC") return RewardMode::kSC;
  if (s == "OFF") return RewardMode::kOff;
  throw std::invalid_argument("reward mode must be one of NSC, SC, OFF; got '" + std::string(s) + "'");
}

KlVariant parse_kl_variant(std::string_view s) {
  if (s == "forward_kl") return KlVariant::kForward;
  if (s == "backward_kl") return KlVariant::kBackward;
  throw std::invalid_argument("variant must be forward_kl or backward_kl; got '" + std::string(s) + "'");
}

RewardSpec::RewardSpec(RewardMode text, RewardMode image, KlVariant variant, bool length_normalized)
    : text_(text), image_(image), variant_(variant), length_normalized_(length_normalized) {
  if (text == RewardMode::kOff && image == RewardMode::kOff) {
    throw std::invalid_argument("reward spec must enable at least one segment");
  }
}

double self_certainty(const CategoricalDist& dist) {
  const double v = static_cast<double>(dist.size());
  double mean_log = 0.0;
  for (double p : dist.probs()) mean_log += safe_log(p);
  return std::min(std::log(v) + mean_log / v, 0.0);
}

double backward_variant_reward(const CategoricalDist& dist) {
  return std::min(entropy(dist) - std::log(static_cast<double>(dist.size())), 0.0);
}

double token_reward_cached(double sc, double entropy_gap, Segment segment, const RewardSpec& spec) {
  const double base = spec.variant() == KlVariant::kForward ? sc : entropy_gap;
  switch (spec.mode(segment)) {
    case RewardMode::kNSC: return -base;
    case RewardMode::kSC: return base;
    case RewardMode::kOff: return 0.0;
  }
  return 0.0;
}

double token_reward(const CategoricalDist& dist, Segment segment, const RewardSpec& spec) {
  if (spec.mode(segment) == RewardMode::kOff) return 0.0;
  const double base = spec.variant() == KlVariant::kForward ? self_certainty(dist) : backward_variant_reward(dist);
  return spec.mode(segment) == RewardMode::kNSC ? -base : base;
}

double trajectory_return(const Trajectory& trajectory, const RewardSpec& spec) {
  const auto positions = trajectory.scored_positions();
  if (trajectory.token_sc.size() != positions.size() || trajectory.token_entropy_gap.size() != positions.size()) {
    throw std::invalid_argument("trajectory is missing cached per-token certainty values");
  }
  double u = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    u += token_reward_cached(trajectory.token_sc[i], trajectory.token_entropy_gap[i],
                             trajectory.tokens[positions[i]].segment, spec);
  }
  if (spec.length_normalized() && !positions.empty()) u /= static_cast<double>(positions.size());
  return u;
}

}  // namespace irislab
