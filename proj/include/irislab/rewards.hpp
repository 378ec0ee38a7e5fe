#pragma once

#include <string_view>

#include "irislab/core.hpp"
#include "irislab/domain.hpp"
#include "irislab/trajectory.hpp"

namespace irislab {

enum class RewardMode { kNSC, kSC, kOff };
enum class KlVariant { kForward, kBackward };

std::string_view to_string(RewardMode m);
std::string_view to_string(KlVariant v);
RewardMode parse_reward_mode(std::string_view s);
KlVariant parse_kl_variant(std::string_view s);

/// Per-segment sign and divergence choice for the intrinsic reward.
class RewardSpec {
 public:
  // Throws std::invalid_argument when both segments are off.
  RewardSpec(RewardMode text, RewardMode image, KlVariant variant = KlVariant::kForward,
             bool length_normalized = false);
  RewardSpec() : RewardSpec(RewardMode::kNSC, RewardMode::kNSC) {}

  RewardMode text_mode() const { return text_; }
  RewardMode image_mode() const { return image_; }
  RewardMode mode(Segment s) const { return s == Segment::kText ? text_ : image_; }
  KlVariant variant() const { return variant_; }
  // Divide u_i by the number of scored tokens instead of summing.
  bool length_normalized() const { return length_normalized_; }
  bool operator==(const RewardSpec&) const = default;

 private:
  RewardMode text_;
  RewardMode image_;
  KlVariant variant_;
  bool length_normalized_;
};

// -KL(U || p) = ln V + (1/V) sum ln p_i. Zero at uniform, negative otherwise.
double self_certainty(const CategoricalDist& dist);

// -KL(p || U) = H(p) - ln V.
double backward_variant_reward(const CategoricalDist& dist);

double token_reward(const CategoricalDist& dist, Segment segment, const RewardSpec& spec);

// Same dispatch from cached per-token values.
double token_reward_cached(double sc, double entropy_gap, Segment segment, const RewardSpec& spec);

// u_i: sum (or mean, when length-normalized) of token rewards over scored tokens.
double trajectory_return(const Trajectory& trajectory, const RewardSpec& spec);

}  // namespace irislab
