#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irislab/config.hpp"
#include "irislab/trainer.hpp"

namespace irislab {

/// One experimental arm: a reward spec, CoT switch and training reward source.
/// `axis` lists the dotted config keys this arm is allowed to change relative
/// to the suite's reference arm.
struct AblationArm {
  std::string name;
  RewardSpec spec;
  bool cot_enabled = true;
  RewardSource source = RewardSource::kIntrinsic;
  std::vector<std::string> axis;
};

// The eight canonical arms; the first is the reference (NSC on both segments, with CoT).
std::vector<AblationArm> canonical_arms();

ResolvedConfig arm_config(const ResolvedConfig& base, const AblationArm& arm);

// Dotted keys whose values differ between two configs.
std::vector<std::string> config_diff(const nlohmann::json& a, const nlohmann::json& b);

enum class TableMode { kFixedStep, kBestStep };

struct ArmRow {
  std::string name;
  int step = 0;
  double oracle = 0.0;
  double color_entropy = 0.0;
  double sc_text = 0.0;
  double sc_image = 0.0;
  double intrinsic_return = 0.0;
  std::vector<std::string> config_diff;  // relative to the reference arm
  bool diff_within_axis = true;
};

struct ComparisonTable {
  TableMode mode = TableMode::kFixedStep;
  std::vector<ArmRow> rows;
  bool controlled = true;  // every arm's diff lies within its declared axis

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

// Builds the table from finished run directories (eval/step_N.json files).
ComparisonTable build_comparison(const std::vector<AblationArm>& arms, const std::vector<std::filesystem::path>& run_dirs,
                                 TableMode mode);

struct SuiteResult {
  std::vector<std::filesystem::path> run_dirs;
  ComparisonTable table;
};

/// Trains every arm into out_dir/<arm name>, then writes comparison.json and
/// comparison.txt (fixed-step) and comparison_best_step.{json,txt}. Throws on
/// duplicate arm names. Arms run concurrently when options.workers > 1.
SuiteResult run_ablation_suite(const ResolvedConfig& base, const std::vector<AblationArm>& arms,
                               const std::filesystem::path& out_dir, const RunOptions& options = {});

struct Fig2Summary {
  std::filesystem::path run_dir;
  std::filesystem::path curve_path;
  std::size_t rows = 0;
  double train_step0_sc_image = 0.0;
  double train_step0_stderr = 0.0;
  double eval_step0_sc_image = 0.0;
  double eval_step0_stderr = 0.0;
  bool step0_consistent = false;  // |difference| within 4 combined standard errors
};

/// Trains with the oracle reward as the only return while logging image SC;
/// writes fig2_curve.tsv (step, mean_sc_image, mean_oracle_reward) and
/// fig2_summary.json.
Fig2Summary run_fig2_analog(const ResolvedConfig& config, const std::filesystem::path& out_dir,
                            const RunOptions& options = {});

}  // namespace irislab
