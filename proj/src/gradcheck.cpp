#include "irislab/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "irislab/rollout.hpp"
#include "irislab/trainer.hpp"

namespace irislab {

ResolvedConfig small_gradcheck_config() {
  ResolvedConfig c;
  c.policy.d = 4;
  c.policy.k = 2;
  c.policy.h = 8;
  c.policy.init_scale = 0.3;
  c.trainer.group_size = 4;
  c.trainer.prompts_per_step = 4;
  c.trainer.max_text_len = 6;
  return c;
}

namespace {

PolicyParams perturbed(const PolicyParams& base, const RngStream& rng, double scale) {
  PolicyParams p = base;
  RngDraws draws(rng);
  for (Tensor* t : p.tensors()) {
    for (double& x : t->data) x += draws.uniform(-scale, scale);
  }
  return p;
}

}  // namespace

GradCheckResult run_grad_check(const ResolvedConfig& config, double h) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const TrainerConfig& tc = config.trainer;
  const RngStream root = purpose_stream(tc.seed, StreamPurpose::kGradCheck);

  const PolicyParams behavior = init_params(root.derive(0), config.policy);
  const PolicyParams params = perturbed(behavior, root.derive(1), 0.2);
  const PolicyParams reference = perturbed(behavior, root.derive(2), 0.05);

  const RolloutOptions rollout{{tc.max_text_len}, tc.cot_enabled, tc.reward};
  const OracleOptions oracle{tc.oracle_alpha, tc.spatial_threshold};
  std::vector<TrajectoryGroup> groups;
  const auto prompts = step_prompts(tc.seed, 0, tc.prompts_per_step);
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    TrajectoryGroup g = generate_group(behavior, prompts[j], tc.group_size, root.derive(3).derive(j), rollout);
    for (auto& m : g.members) m.oracle_score = oracle_reward(decode_image(m.image_tokens()), m.prompt.scene, oracle);
    compute_advantages(g, tc.reward_source);
    groups.push_back(std::move(g));
  }

  const ObjectiveResult analytic = objective_and_gradient(params, behavior, reference, groups, tc);
  GradCheckResult result;
  result.objective = analytic.objective;
  result.clip_fraction = analytic.clip_fraction;

  PolicyParams probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.gradient.tensors();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    Tensor& tensor = *probe_tensors[t];
    for (std::size_t i = 0; i < tensor.data.size(); ++i) {
      const double saved = tensor.data[i];
      tensor.data[i] = saved + h;
      const double up = objective_and_gradient(probe, behavior, reference, groups, tc).objective;
      tensor.data[i] = saved - h;
      const double down = objective_and_gradient(probe, behavior, reference, groups, tc).objective;
      tensor.data[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = grad_tensors[t]->data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > result.max_rel_error || result.parameters == 0) {
        result.max_rel_error = rel;
        result.worst_tensor = tensor.name;
        result.worst_index = i;
      }
      ++result.parameters;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace irislab
