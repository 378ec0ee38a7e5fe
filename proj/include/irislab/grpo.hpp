#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "irislab/policy.hpp"
#include "irislab/rewards.hpp"
#include "irislab/trajectory.hpp"

namespace irislab {

enum class RewardSource { kIntrinsic, kOracleExternal };
std::string_view to_string(RewardSource s);
RewardSource parse_reward_source(std::string_view s);

struct TrainerConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.01;
  double learning_rate = 1e-3;
  int inner_epochs = 2;
  int prompts_per_step = 8;
  int total_steps = 300;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  RewardSpec reward;
  RewardSource reward_source = RewardSource::kIntrinsic;
  bool cot_enabled = true;
  int max_text_len = 16;
  double oracle_alpha = 0.6;
  double spatial_threshold = 2.0;
  int eval_every = 100;
  int checkpoint_every = 100;
  int eval_images_per_prompt = 4;
  std::uint64_t eval_seed = 20240;
  bool log_wall_time = false;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct OptimizerState {
  PolicyParams first_moment;
  PolicyParams second_moment;
  std::int64_t step = 0;

  static OptimizerState fresh(const PolicyConfig& config);
  bool operator==(const OptimizerState&) const = default;
};

class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update that ascends the objective. Throws
/// DivergedError("diverged") on a non-finite gradient, leaving params and
/// state untouched.
void adam_step(PolicyParams& params, const PolicyParams& grad, OptimizerState& state, double lr,
               const AdamHyper& hyper = {});

struct Advantages {
  std::vector<double> values;
  bool degenerate = false;
};

// Z-scores with the population standard deviation; std < 1e-8 -> all zeros.
Advantages compute_advantages(std::span<const double> returns);

// Fills group.advantages from each member's intrinsic return or oracle score.
void compute_advantages(TrajectoryGroup& group, RewardSource source = RewardSource::kIntrinsic);

double surrogate_term(double ratio, double advantage, double epsilon);

struct ObjectiveResult {
  double objective = 0.0;
  PolicyParams gradient;
  double clip_fraction = 0.0;    // over scored tokens of non-degenerate groups
  double mean_kl_to_ref = 0.0;   // nats per scored token
  std::size_t scored_tokens = 0;
  // Pearson correlation of |o_i| with A_i over members of non-degenerate
  // groups; 0 when either is constant.
  double length_advantage_corr = 0.0;
};

/// J = (1/B) sum_groups (1/G) sum_i (1/|o_i|) sum_t [ min(c A, clip(c) A) - beta KL(pi || pi_ref) ]
/// with exact per-token categorical KL. Degenerate groups contribute nothing.
/// Throws std::invalid_argument when a group was sampled by other parameters
/// than `behavior`.
ObjectiveResult objective_and_gradient(const PolicyParams& params, const PolicyParams& behavior,
                                       const PolicyParams& reference, std::span<const TrajectoryGroup> groups,
                                       const TrainerConfig& config, int workers = 1);

}  // namespace irislab
