#include "irislab/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "irislab/checkpoint.hpp"
#include "irislab/config.hpp"
#include "irislab/eval.hpp"
#include "irislab/experiments.hpp"
#include "irislab/gradcheck.hpp"
#include "irislab/telemetry.hpp"
#include "irislab/trainer.hpp"

namespace irislab {

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Thrown for bad user input discovered after parsing (config keys, prompts).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::optional<std::string> config;
  std::optional<double> kl_beta, clip_epsilon, lr;
  std::optional<int> group_size, steps, prompts_per_step, inner_epochs;
  std::optional<std::uint64_t> seed;
  std::optional<bool> cot;
  std::optional<std::string> text_mode, image_mode, variant, reward_source;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--kl-beta", kl_beta, "trainer.kl_beta");
    app->add_option("--clip-epsilon", clip_epsilon, "trainer.clip_epsilon");
    app->add_option("--lr", lr, "trainer.learning_rate");
    app->add_option("--group-size", group_size, "trainer.group_size");
    app->add_option("--steps", steps, "trainer.total_steps");
    app->add_option("--prompts-per-step", prompts_per_step, "trainer.prompts_per_step");
    app->add_option("--inner-epochs", inner_epochs, "trainer.inner_epochs");
    app->add_option("--seed", seed, "seed");
    app->add_option("--cot", cot, "trainer.cot_enabled (true/false)");
    app->add_option("--text-mode", text_mode, "reward.text_mode (NSC, SC, OFF)");
    app->add_option("--image-mode", image_mode, "reward.image_mode (NSC, SC, OFF)");
    app->add_option("--variant", variant, "reward.variant (forward_kl, backward_kl)");
    app->add_option("--reward-source", reward_source, "trainer.reward_source (intrinsic, oracle_external)");
    app->add_option("--set", sets, "dotted.key=value override (repeatable)");
  }

  ResolvedConfig resolve() const {
    ConfigOverrides o;
    auto num = [&](const char* key, const auto& v) {
      if (v) o.emplace_back(key, fmt::format("{}", *v));
    };
    auto str = [&](const char* key, const std::optional<std::string>& v) {
      if (v) o.emplace_back(key, nlohmann::json(*v).dump());
    };
    num("trainer.kl_beta", kl_beta);
    num("trainer.clip_epsilon", clip_epsilon);
    num("trainer.learning_rate", lr);
    num("trainer.group_size", group_size);
    num("trainer.total_steps", steps);
    num("trainer.prompts_per_step", prompts_per_step);
    num("trainer.inner_epochs", inner_epochs);
    num("seed", seed);
    if (cot) o.emplace_back("trainer.cot_enabled", *cot ? "true" : "false");
    str("reward.text_mode", text_mode);
    str("reward.image_mode", image_mode);
    str("reward.variant", variant);
    str("trainer.reward_source", reward_source);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
      o.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    try {
      return resolve_config(config, o, env_seed_override());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

void print_record(const MetricsRecord& r) {
  fmt::print("step {:>4}  return {:+.4f}  sc_text {:+.4f}  sc_image {:+.4f}  oracle {:.3f}  entropy {:.3f}  clip {:.3f}\n",
             r.step, r.mean_intrinsic_return, r.mean_sc_text, r.mean_sc_image, r.mean_oracle_reward,
             r.mean_color_entropy, r.clip_fraction);
  std::fflush(stdout);
}

void print_eval(const EvalReport& report) {
  for (std::size_t c = 0; c < kAllCategories.size(); ++c) {
    fmt::print("{:<11} {:.4f}  ({} prompts)\n", category_name(kAllCategories[c]), report.category_oracle[c],
               report.category_prompts[c]);
  }
  fmt::print("overall     {:.4f}\n", report.overall_oracle);
  fmt::print("sc_text {:+.4f}  sc_image {:+.4f}  color_entropy {:.4f}\n", report.mean_sc_text, report.mean_sc_image,
             report.mean_color_entropy);
}

int cmd_rollout(const std::string& ckpt_path, const std::string& prompt_text, std::uint64_t seed) {
  Prompt prompt;
  try {
    prompt = parse_prompt(prompt_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  ResolvedConfig config;
  config.policy = ckpt.params.config;
  try {
    config = ResolvedConfig::from_json(ckpt.meta.config);
  } catch (const std::exception&) {
  }
  const TrainerConfig& t = config.trainer;
  const RolloutOptions options{{t.max_text_len}, t.cot_enabled, t.reward};
  const Trajectory traj =
      generate(ckpt.params, prompt, purpose_stream(seed, StreamPurpose::kRollout).derive(0), options);

  std::string cot;
  for (const auto& tok : traj.text_tokens()) {
    if (tok == vocab::kBoi) continue;
    if (!cot.empty()) cot += ' ';
    cot += std::string(vocab::word(tok));
  }
  double text_sum = 0.0, image_sum = 0.0;
  int text_n = 0, image_n = 0;
  const auto positions = traj.scored_positions();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (traj.tokens[positions[i]].segment == Segment::kText) {
      text_sum += traj.token_sc[i];
      ++text_n;
    } else {
      image_sum += traj.token_sc[i];
      ++image_n;
    }
  }
  const GridImage grid = decode_image(traj.image_tokens());
  fmt::print("prompt: {}\n", to_text(prompt.tokens));
  fmt::print("cot: {}\n", cot.empty() ? "(none)" : cot);
  fmt::print("{}", grid_to_string(grid));
  fmt::print("sc_text: {:+.6f} ({} tokens)\n", text_n ? text_sum / text_n : 0.0, text_n);
  fmt::print("sc_image: {:+.6f} ({} tokens)\n", image_n ? image_sum / image_n : 0.0, image_n);
  fmt::print("oracle: {:.4f}\n", oracle_reward(grid, prompt.scene, {t.oracle_alpha, t.spatial_threshold}));
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Intrinsic-reward GRPO lab for a toy text-to-image token model"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "worker threads (never changes results)")->check(CLI::PositiveNumber);

  ConfigFlags train_flags;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train a policy into a run directory");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--out", train_out, "run directory")->required();

  std::string eval_ckpt, eval_prompts, eval_out;
  int eval_images = 4;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a prompt set");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--prompts", eval_prompts, "prompt file (default: built-in 40 prompts)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "report JSON path")->required();
  eval_cmd->add_option("--images", eval_images, "images per prompt")->check(CLI::PositiveNumber);

  ConfigFlags ablate_flags;
  std::string suite = "canonical", ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation suite");
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--suite", suite, "suite name")->check(CLI::IsMember({"canonical"}));
  ablate_cmd->add_option("--out", ablate_out, "suite directory")->required();

  std::string rollout_ckpt, rollout_prompt;
  std::uint64_t rollout_seed = 0;
  auto* rollout_cmd = app.add_subcommand("rollout", "sample one trajectory and print it");
  rollout_cmd->add_option("--ckpt", rollout_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  rollout_cmd->add_option("--prompt", rollout_prompt, "prompt text, e.g. \"two red\"")->required();
  rollout_cmd->add_option("--seed", rollout_seed, "sampling seed");

  std::optional<std::string> gc_config;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of the GRPO gradient");
  gc_cmd->add_option("--config", gc_config, "JSON config (default: d=4, k=2, h=8)")->check(CLI::ExistingFile);

  std::string render_log, render_out;
  int render_smooth = 1;
  auto* render_cmd = app.add_subcommand("render", "render metric curves as SVG");
  render_cmd->add_option("--log", render_log, "metrics.jsonl")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render_out, "output directory")->required();
  render_cmd->add_option("--smooth", render_smooth, "moving-average window")->check(CLI::PositiveNumber);

  ConfigFlags fig2_flags;
  std::string fig2_out;
  auto* fig2_cmd = app.add_subcommand("fig2", "oracle-reward training while monitoring image SC");
  fig2_flags.attach(fig2_cmd);
  fig2_cmd->add_option("--out", fig2_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const RunOptions run_options{workers, nullptr};
  try {
    if (*train_cmd) {
      const ResolvedConfig config = train_flags.resolve();
      fmt::print("config {} -> {}\n", config.hash(), train_out);
      RunOptions opts = run_options;
      opts.on_record = print_record;
      const TrainResult result = train(config, train_out, opts);
      fmt::print("final checkpoint: {}\n", result.final_checkpoint.string());
    } else if (*eval_cmd) {
      const std::vector<Prompt> prompts = eval_prompts.empty() ? default_eval_prompts() : load_prompt_set(eval_prompts);
      const EvalReport report = evaluate_checkpoint(eval_ckpt, prompts, eval_images);
      std::ofstream out(eval_out);
      if (!out) throw std::runtime_error("cannot write " + eval_out);
      out << report.to_json().dump(2) << '\n';
      print_eval(report);
    } else if (*ablate_cmd) {
      const ResolvedConfig base = ablate_flags.resolve();
      const SuiteResult suite_result = run_ablation_suite(base, canonical_arms(), ablate_out, run_options);
      fmt::print("{}", suite_result.table.to_text());
      if (!suite_result.table.controlled) {
        fmt::print(stderr, "arm configs differ outside their declared axes\n");
        return kExitRuntime;
      }
    } else if (*rollout_cmd) {
      return cmd_rollout(rollout_ckpt, rollout_prompt, rollout_seed);
    } else if (*gc_cmd) {
      ResolvedConfig config = small_gradcheck_config();
      if (gc_config) {
        ConfigFlags flags;
        flags.config = gc_config;
        config = flags.resolve();
      }
      const GradCheckResult r = run_grad_check(config);
      fmt::print("parameters checked: {}\n", r.parameters);
      fmt::print("objective: {:.10g}  clip fraction: {:.4f}\n", r.objective, r.clip_fraction);
      fmt::print("max relative error: {:.3e} ({}[{}])\n", r.max_rel_error, r.worst_tensor, r.worst_index);
      fmt::print("elapsed: {:.2f} s\n", r.seconds);
      const bool ok = r.max_rel_error <= 1e-4;
      fmt::print("{}\n", ok ? "PASS" : "FAIL");
      return ok ? 0 : kExitRuntime;
    } else if (*render_cmd) {
      for (const auto& p : render_curves(render_log, render_out, {render_smooth})) fmt::print("{}\n", p.string());
    } else if (*fig2_cmd) {
      RunOptions opts = run_options;
      opts.on_record = print_record;
      const Fig2Summary s = run_fig2_analog(fig2_flags.resolve(), fig2_out, opts);
      fmt::print("curve: {} ({} rows)\n", s.curve_path.string(), s.rows);
      fmt::print("step-0 image SC: train {:+.5f} +/- {:.5f}, eval {:+.5f} +/- {:.5f} ({})\n", s.train_step0_sc_image,
                 s.train_step0_stderr, s.eval_step0_sc_image, s.eval_step0_stderr,
                 s.step0_consistent ? "consistent" : "inconsistent");
    }
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return 0;
}

}  // namespace irislab
