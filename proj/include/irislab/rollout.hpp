#pragma once

#include <functional>

#include "irislab/policy.hpp"
#include "irislab/rewards.hpp"
#include "irislab/trajectory.hpp"

namespace irislab {

struct RolloutLimits {
  int max_text_len = 16;
};

struct RolloutOptions {
  RolloutLimits limits;
  bool cot_enabled = true;
  RewardSpec spec;
};

/// Samples CoT text (until <BOI> or the length limit, which forces <BOI>)
/// and then exactly 64 image tokens at temperature 1. Records the behavior
/// log-prob, SC and entropy gap of every sampled token, and u_i.
Trajectory generate(const PolicyParams& params, const Prompt& prompt, const RngStream& rng,
                    const RolloutOptions& options);

/// Member i is sampled from base_rng.derive(i). Results are in member order
/// for any worker count.
TrajectoryGroup generate_group(const PolicyParams& params, const Prompt& prompt, int group_size,
                               const RngStream& base_rng, const RolloutOptions& options, int workers = 1);

// Runs fn(0..n-1) across up to `workers` threads; each index is handled once.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace irislab
