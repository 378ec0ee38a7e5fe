#include "irislab/rollout.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace irislab {

Trajectory generate(const PolicyParams& params, const Prompt& prompt, const RngStream& rng,
                    const RolloutOptions& options) {
  Trajectory traj;
  traj.prompt = prompt;
  traj.snapshot_hash = params.hash();
  RngDraws draws(rng);
  const auto feature = prompt_feature(params, prompt);

  auto sample_at = [&](Segment segment) {
    const auto ctx = context_window(traj.tokens, traj.tokens.size(), params.config.k);
    const ForwardCache step = forward_cached(params, feature, ctx, segment);
    const TokenId id = draws.sample(step.dist);
    traj.tokens.push_back({id, segment, false});
    traj.behavior_log_probs.push_back(safe_log(step.dist.prob_of(id)));
    traj.token_sc.push_back(self_certainty(step.dist));
    traj.token_entropy_gap.push_back(backward_variant_reward(step.dist));
    return id;
  };

  bool boi_emitted = false;
  if (options.cot_enabled) {
    for (int i = 0; i < options.limits.max_text_len; ++i) {
      if (sample_at(Segment::kText) == vocab::kBoi) {
        boi_emitted = true;
        break;
      }
    }
  }
  if (!boi_emitted) traj.tokens.push_back({vocab::kBoi, Segment::kText, true});
  for (int i = 0; i < kImageTokens; ++i) sample_at(Segment::kImage);

  traj.intrinsic_return = trajectory_return(traj, options.spec);
  return traj;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

TrajectoryGroup generate_group(const PolicyParams& params, const Prompt& prompt, int group_size,
                               const RngStream& base_rng, const RolloutOptions& options, int workers) {
  if (group_size < 2) throw std::invalid_argument("group size must allow normalization");
  TrajectoryGroup group;
  group.prompt = prompt;
  group.snapshot_hash = params.hash();
  group.members.resize(static_cast<std::size_t>(group_size));
  parallel_for(group.members.size(), workers, [&](std::size_t i) {
    group.members[i] = generate(params, prompt, base_rng.derive(i), options);
  });
  return group;
}

}  // namespace irislab
