#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "irislab/config.hpp"
#include "irislab/eval.hpp"
#include "irislab/grpo.hpp"
#include "irislab/telemetry.hpp"

namespace irislab {

struct RunOptions {
  int workers = 1;  // never affects results
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  PolicyParams params;
  OptimizerState optimizer;
  std::vector<MetricsRecord> records;
  std::filesystem::path final_checkpoint;
};

// Prompts of step `step`: prompt j has category j mod 4.
std::vector<Prompt> step_prompts(std::uint64_t seed, int step, int prompts_per_step);

std::vector<Prompt> load_eval_prompts(const ResolvedConfig& config);

/// Run directory layout:
///   config.json, metrics.jsonl, checkpoints/step_N, eval/step_N.json
/// Record s summarizes the rollouts of the policy after s updates; eval/step_N
/// evaluates the policy after N updates (N = 0, every eval_every, and the end).
TrainResult train(const ResolvedConfig& config, const std::filesystem::path& run_dir, const RunOptions& options = {});

}  // namespace irislab
