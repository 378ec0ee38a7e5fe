#pragma once

#include <string>

#include "irislab/config.hpp"

namespace irislab {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t parameters = 0;
  double objective = 0.0;
  double clip_fraction = 0.0;
  double seconds = 0.0;
};

// Default config with d=4, k=2, h=8, four prompts (one per category), G=4.
ResolvedConfig small_gradcheck_config();

/// Compares the analytic GRPO gradient to central finite differences (step
/// `h`) over every parameter. Groups are sampled from a behavior snapshot;
/// the evaluated parameters and the reference are independent perturbations
/// of it, so ratios leave 1, some tokens clip and the KL term is nonzero.
/// Relative error per entry: |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult run_grad_check(const ResolvedConfig& config, double h = 1e-5);

}  // namespace irislab
