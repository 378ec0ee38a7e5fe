#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irislab/domain.hpp"
#include "irislab/rollout.hpp"

namespace irislab {

// Anything that turns (prompt, rng) into a trajectory: the policy, or a test double.
using TrajectorySource = std::function<Trajectory(const Prompt&, const RngStream&)>;

struct EvalOptions {
  int images_per_prompt = 4;
  std::uint64_t eval_seed = 20240;
  RewardSpec spec;  // used for mean_intrinsic_return
  OracleOptions oracle;
};

struct PromptRow {
  std::string prompt;
  PromptCategory category;
  int samples = 0;
  double mean_oracle = 0.0;
};

struct EvalReport {
  int images_per_prompt = 0;
  std::vector<PromptRow> rows;
  std::array<double, 4> category_oracle{};  // indexed like kAllCategories
  std::array<int, 4> category_prompts{};
  double overall_oracle = 0.0;
  double mean_sc_text = 0.0;   // per text token
  double mean_sc_image = 0.0;  // per image token
  double sc_image_stderr = 0.0;  // standard error over per-image means
  double mean_color_entropy = 0.0;
  double mean_intrinsic_return = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// Samples `images_per_prompt` trajectories per prompt; prompt p, image j uses
/// stream purpose_stream(eval_seed, kEval).derive(p).derive(j).
EvalReport evaluate(const TrajectorySource& source, std::span<const Prompt> prompts, const EvalOptions& options);

EvalReport evaluate_policy(const PolicyParams& params, std::span<const Prompt> prompts,
                           const RolloutOptions& rollout, const EvalOptions& options);

// Loads a checkpoint and evaluates it with the rollout/eval settings stored in its config.
EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, std::span<const Prompt> prompts,
                               int images_per_prompt = 4);

// Test double: emits the ideal grid for the prompt's scene after a forced <BOI>.
Trajectory ideal_trajectory(const Prompt& prompt);

}  // namespace irislab
