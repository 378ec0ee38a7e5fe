#include "irislab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/core.h>

#include "irislab/rollout.hpp"

namespace irislab {

std::string_view to_string(RewardSource s) {
  return s == RewardSource::kIntrinsic ? "intrinsic" : "oracle_external";
}

RewardSource parse_reward_source(std::string_view s) {
  if (s == "intrinsic") return RewardSource::kIntrinsic;
  if (s == "oracle_external") return RewardSource::kOracleExternal;
  throw std::invalid_argument("reward_source must be intrinsic or oracle_external; got '" + std::string(s) + "'");
}

void TrainerConfig::validate() const {
  auto require = [](bool ok, std::string_view key, std::string_view constraint) {
    if (!ok) throw std::invalid_argument(fmt::format("{}: must satisfy {}", key, constraint));
  };
  require(group_size >= 2, "trainer.group_size", ">= 2");
  require(clip_epsilon > 0.0 && clip_epsilon < 1.0, "trainer.clip_epsilon", "in (0, 1)");
  require(kl_beta >= 0.0 && std::isfinite(kl_beta), "trainer.kl_beta", ">= 0");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "trainer.learning_rate", "> 0");
  require(inner_epochs >= 1, "trainer.inner_epochs", ">= 1");
  require(prompts_per_step >= 1, "trainer.prompts_per_step", ">= 1");
  require(total_steps >= 0, "trainer.total_steps", ">= 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "trainer.adam_beta1", "in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "trainer.adam_beta2", "in [0, 1)");
  require(adam_eps > 0.0, "trainer.adam_eps", "> 0");
  require(max_text_len >= 0, "trainer.max_text_len", ">= 0");
  require(oracle_alpha >= 0.0 && oracle_alpha <= 1.0, "trainer.oracle_alpha", "in [0, 1]");
  require(spatial_threshold > 0.0, "trainer.spatial_threshold", "> 0");
  require(eval_every >= 0, "trainer.eval_every", ">= 0 (0 disables periodic eval)");
  require(checkpoint_every >= 0, "trainer.checkpoint_every", ">= 0 (0 disables periodic checkpoints)");
  require(eval_images_per_prompt >= 1, "trainer.eval_images_per_prompt", ">= 1");
}

OptimizerState OptimizerState::fresh(const PolicyConfig& config) {
  return OptimizerState{PolicyParams::zeros(config), PolicyParams::zeros(config), 0};
}

void adam_step(PolicyParams& params, const PolicyParams& grad, OptimizerState& state, double lr,
               const AdamHyper& hyper) {
  if (!grad.all_finite()) throw DivergedError("diverged");
  if (params.parameter_count() != grad.parameter_count() ||
      params.parameter_count() != state.first_moment.parameter_count()) {
    throw std::invalid_argument("shape mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);

  auto p = params.tensors();
  auto g = grad.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p[i]->data.size(); ++j) {
      const double gj = g[i]->data[j];
      double& mj = m[i]->data[j];
      double& vj = v[i]->data[j];
      mj = hyper.beta1 * mj + (1.0 - hyper.beta1) * gj;
      vj = hyper.beta2 * vj + (1.0 - hyper.beta2) * gj * gj;
      p[i]->data[j] += lr * (mj / correction1) / (std::sqrt(vj / correction2) + hyper.eps);
    }
  }
}

Advantages compute_advantages(std::span<const double> returns) {
  Advantages out;
  const double n = static_cast<double>(returns.size());
  out.values.assign(returns.size(), 0.0);
  if (returns.empty()) {
    out.degenerate = true;
    return out;
  }
  double mean = 0.0;
  for (double u : returns) mean += u;
  mean /= n;
  double var = 0.0;
  for (double u : returns) var += (u - mean) * (u - mean);
  const double std = std::sqrt(var / n);
  if (!(std >= 1e-8)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < returns.size(); ++i) out.values[i] = (returns[i] - mean) / std;
  return out;
}

void compute_advantages(TrajectoryGroup& group, RewardSource source) {
  std::vector<double> u;
  u.reserve(group.members.size());
  for (const auto& m : group.members) {
    if (source == RewardSource::kIntrinsic) {
      u.push_back(m.intrinsic_return);
    } else {
      if (!m.oracle_score) throw std::invalid_argument("member has no oracle score");
      u.push_back(*m.oracle_score);
    }
  }
  Advantages adv = compute_advantages(u);
  group.advantages = std::move(adv.values);
  group.degenerate = adv.degenerate;
}

double surrogate_term(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct GroupContribution {
  PolicyParams gradient;
  double objective = 0.0;
  double kl_sum = 0.0;
  std::size_t tokens = 0;
  std::size_t clipped = 0;
};

GroupContribution group_contribution(const PolicyParams& params, const PolicyParams& reference,
                                     const TrajectoryGroup& group, double batch_scale,
                                     const TrainerConfig& config) {
  GroupContribution out{PolicyParams::zeros(params.config)};
  const double member_scale = batch_scale / static_cast<double>(group.members.size());
  const double eps = config.clip_epsilon;
  const double beta = config.kl_beta;

  for (std::size_t i = 0; i < group.members.size(); ++i) {
    const Trajectory& traj = group.members[i];
    const TrajectoryPass pass = run_trajectory(params, traj);
    const TrajectoryPass ref = run_trajectory(reference, traj);
    const auto positions = traj.scored_positions();
    if (positions.empty()) continue;
    const double w = member_scale / static_cast<double>(positions.size());
    const double advantage = group.advantages[i];

    std::vector<TokenUpstream> upstream(positions.size());
    for (std::size_t t = 0; t < positions.size(); ++t) {
      const CategoricalDist& dist = pass.steps[t].dist;
      const CategoricalDist& ref_dist = ref.steps[t].dist;
      const double log_p = safe_log(dist.prob_of(traj.tokens[positions[t]].id));
      const double ratio = std::exp(log_p - traj.behavior_log_probs[t]);

      const double unclipped = ratio * advantage;
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
      const bool clip_binds = clipped < unclipped;
      const double kl = kl_divergence(dist, ref_dist);

      out.objective += w * (std::min(unclipped, clipped) - beta * kl);
      out.kl_sum += kl;
      out.tokens += 1;
      out.clipped += clip_binds ? 1 : 0;

      upstream[t].d_log_prob = clip_binds ? 0.0 : w * ratio * advantage;
      if (beta != 0.0) {
        // d/dp_j of -beta * sum_j p_j (ln p_j - ln r_j)
        upstream[t].d_probs.resize(dist.size());
        for (std::size_t j = 0; j < dist.size(); ++j) {
          upstream[t].d_probs[j] = -w * beta * (safe_log(dist[j]) - safe_log(ref_dist[j]) + 1.0);
        }
      }
    }
    accumulate_backward(params, traj, pass, upstream, out.gradient);
  }
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

ObjectiveResult objective_and_gradient(const PolicyParams& params, const PolicyParams& behavior,
                                       const PolicyParams& reference, std::span<const TrajectoryGroup> groups,
                                       const TrainerConfig& config, int workers) {
  const std::uint64_t behavior_hash = behavior.hash();
  for (const auto& g : groups) {
    if (g.snapshot_hash != behavior_hash) {
      throw std::invalid_argument("group was not generated under the behavior snapshot (hash mismatch)");
    }
    if (g.advantages.size() != g.members.size()) throw std::invalid_argument("group advantages not computed");
  }

  ObjectiveResult result{0.0, PolicyParams::zeros(params.config)};
  if (groups.empty()) return result;
  const double batch_scale = 1.0 / static_cast<double>(groups.size());

  std::vector<GroupContribution> parts(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t g) {
    if (groups[g].degenerate) {
      parts[g] = GroupContribution{PolicyParams::zeros(params.config)};
      return;
    }
    parts[g] = group_contribution(params, reference, groups[g], batch_scale, config);
  });

  double kl_sum = 0.0;
  std::size_t clipped = 0;
  for (const auto& part : parts) {
    result.objective += part.objective;
    result.gradient.add_scaled(part.gradient, 1.0);
    kl_sum += part.kl_sum;
    clipped += part.clipped;
    result.scored_tokens += part.tokens;
  }
  if (result.scored_tokens > 0) {
    result.clip_fraction = static_cast<double>(clipped) / static_cast<double>(result.scored_tokens);
    result.mean_kl_to_ref = kl_sum / static_cast<double>(result.scored_tokens);
  }

  std::vector<double> lengths, advantages;
  for (const auto& g : groups) {
    if (g.degenerate) continue;
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      lengths.push_back(static_cast<double>(g.members[i].scored_count()));
      advantages.push_back(g.advantages[i]);
    }
  }
  result.length_advantage_corr = pearson(lengths, advantages);
  return result;
}

}  // namespace irislab
