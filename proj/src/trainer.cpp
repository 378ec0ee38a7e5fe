#include "irislab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>

#include <fmt/core.h>

#include "irislab/checkpoint.hpp"

namespace irislab {

namespace fs = std::filesystem;

std::vector<Prompt> step_prompts(std::uint64_t seed, int step, int prompts_per_step) {
  const RngStream base = purpose_stream(seed, StreamPurpose::kPrompts).derive(static_cast<std::uint64_t>(step));
  std::vector<Prompt> prompts;
  for (int j = 0; j < prompts_per_step; ++j) {
    prompts.push_back(sample_prompt(base.derive(static_cast<std::uint64_t>(j)),
                                    kAllCategories[static_cast<std::size_t>(j) % kAllCategories.size()]));
  }
  return prompts;
}

std::vector<Prompt> load_eval_prompts(const ResolvedConfig& config) {
  return config.eval_prompts.empty() ? default_eval_prompts() : load_prompt_set(config.eval_prompts);
}

namespace {

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

struct RolloutStats {
  double mean_return = 0.0;
  double mean_sc_text = 0.0;
  double mean_sc_image = 0.0;
  double mean_oracle = 0.0;
  double mean_entropy = 0.0;
  double degenerate_fraction = 0.0;
  double sc_image_stderr = 0.0;  // over per-trajectory image means
};

RolloutStats summarize(const std::vector<TrajectoryGroup>& groups) {
  RolloutStats s;
  double text_sum = 0.0, image_sum = 0.0;
  std::size_t text_n = 0, image_n = 0, members = 0, degenerate = 0;
  std::vector<double> per_traj;
  for (const auto& g : groups) {
    degenerate += g.degenerate ? 1 : 0;
    for (const auto& m : g.members) {
      ++members;
      s.mean_return += m.intrinsic_return;
      s.mean_oracle += m.oracle_score.value_or(0.0);
      s.mean_entropy += color_entropy(decode_image(m.image_tokens()));
      const auto positions = m.scored_positions();
      double own = 0.0;
      std::size_t own_n = 0;
      for (std::size_t i = 0; i < positions.size(); ++i) {
        if (m.tokens[positions[i]].segment == Segment::kText) {
          text_sum += m.token_sc[i];
          ++text_n;
        } else {
          own += m.token_sc[i];
          ++own_n;
        }
      }
      image_sum += own;
      image_n += own_n;
      per_traj.push_back(own_n ? own / static_cast<double>(own_n) : 0.0);
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(members, 1));
  s.mean_return /= n;
  s.mean_oracle /= n;
  s.mean_entropy /= n;
  s.mean_sc_text = text_n ? text_sum / static_cast<double>(text_n) : 0.0;
  s.mean_sc_image = image_n ? image_sum / static_cast<double>(image_n) : 0.0;
  if (per_traj.size() > 1) {
    const double k = static_cast<double>(per_traj.size());
    double mean = 0.0, var = 0.0;
    for (double x : per_traj) mean += x;
    mean /= k;
    for (double x : per_traj) var += (x - mean) * (x - mean);
    s.sc_image_stderr = std::sqrt(var / (k - 1.0) / k);
  }
  s.degenerate_fraction = groups.empty() ? 0.0 : static_cast<double>(degenerate) / static_cast<double>(groups.size());
  return s;
}

}  // namespace

TrainResult train(const ResolvedConfig& config, const fs::path& run_dir, const RunOptions& options) {
  config.validate();
  const TrainerConfig& tc = config.trainer;
  fs::create_directories(run_dir);
  write_config_snapshot(config, run_dir.string());

  const CheckpointMeta base_meta{0, config.to_json(), config.hash()};
  auto checkpoint = [&](const PolicyParams& params, const OptimizerState& opt, int step) {
    CheckpointMeta meta = base_meta;
    meta.step = step;
    const fs::path path = run_dir / "checkpoints" / fmt::format("step_{}", step);
    save_checkpoint(path, params, &opt, meta);
    return path;
  };

  const std::vector<Prompt> eval_prompts = load_eval_prompts(config);
  const RolloutOptions rollout{{tc.max_text_len}, tc.cot_enabled, tc.reward};
  const OracleOptions oracle{tc.oracle_alpha, tc.spatial_threshold};
  const EvalOptions eval_options{tc.eval_images_per_prompt, tc.eval_seed, tc.reward, oracle};
  auto run_eval = [&](const PolicyParams& params, int step) {
    EvalReport report = evaluate_policy(params, eval_prompts, rollout, eval_options);
    auto j = report.to_json();
    j["step"] = step;
    write_json_file(run_dir / "eval" / fmt::format("step_{}.json", step), j);
    return report;
  };

  TrainResult result;
  result.params = init_params(purpose_stream(tc.seed, StreamPurpose::kInit), config.policy);
  result.optimizer = OptimizerState::fresh(config.policy);
  const PolicyParams reference = result.params;
  PolicyParams& params = result.params;

  MetricsWriter writer(run_dir / "metrics.jsonl");
  result.final_checkpoint = checkpoint(params, result.optimizer, 0);

  const AdamHyper hyper{tc.adam_beta1, tc.adam_beta2, tc.adam_eps};
  const RngStream rollout_root = purpose_stream(tc.seed, StreamPurpose::kRollout);

  for (int step = 0; step < tc.total_steps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    std::optional<EvalReport> eval;
    if (tc.eval_every > 0 && step % tc.eval_every == 0) eval = run_eval(params, step);

    const PolicyParams behavior = params;
    const auto prompts = step_prompts(tc.seed, step, tc.prompts_per_step);
    std::vector<TrajectoryGroup> groups;
    groups.reserve(prompts.size());
    const RngStream step_root = rollout_root.derive(static_cast<std::uint64_t>(step));
    for (std::size_t j = 0; j < prompts.size(); ++j) {
      TrajectoryGroup g =
          generate_group(behavior, prompts[j], tc.group_size, step_root.derive(j), rollout, options.workers);
      for (auto& m : g.members) m.oracle_score = oracle_reward(decode_image(m.image_tokens()), m.prompt.scene, oracle);
      compute_advantages(g, tc.reward_source);
      groups.push_back(std::move(g));
    }
    const RolloutStats stats = summarize(groups);

    double clip = 0.0, kl = 0.0, grad_norm = 0.0, objective = 0.0, length_corr = 0.0;
    for (int epoch = 0; epoch < tc.inner_epochs; ++epoch) {
      ObjectiveResult res = objective_and_gradient(params, behavior, reference, groups, tc, options.workers);
      try {
        adam_step(params, res.gradient, result.optimizer, tc.learning_rate, hyper);
      } catch (const DivergedError&) {
        result.final_checkpoint = checkpoint(params, result.optimizer, step);
        throw;
      }
      clip += res.clip_fraction;
      kl += res.mean_kl_to_ref;
      grad_norm += res.gradient.norm();
      objective += res.objective;
      length_corr = res.length_advantage_corr;
    }
    const double epochs = static_cast<double>(tc.inner_epochs);

    MetricsRecord rec;
    rec.step = step;
    rec.mean_intrinsic_return = stats.mean_return;
    rec.mean_sc_text = stats.mean_sc_text;
    rec.mean_sc_image = stats.mean_sc_image;
    rec.mean_oracle_reward = stats.mean_oracle;
    rec.mean_color_entropy = stats.mean_entropy;
    rec.clip_fraction = clip / epochs;
    rec.mean_kl_to_ref = kl / epochs;
    rec.grad_norm = grad_norm / epochs;
    rec.degenerate_group_fraction = stats.degenerate_fraction;
    rec.extra["diagnostics"] = {{"objective", objective / epochs}, {"length_advantage_corr", length_corr},
                                  {"sc_image_stderr", stats.sc_image_stderr}};
    if (eval) rec.extra["eval"] = eval->to_json();
    if (tc.log_wall_time) {
      rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                        .count();
    }
    writer.append(rec);
    if (options.on_record) options.on_record(rec);
    result.records.push_back(std::move(rec));

    const int done = step + 1;
    if (done == tc.total_steps || (tc.checkpoint_every > 0 && done % tc.checkpoint_every == 0)) {
      result.final_checkpoint = checkpoint(params, result.optimizer, done);
    }
  }
  if (tc.eval_every > 0) run_eval(params, tc.total_steps);
  return result;
}

}  // namespace irislab
