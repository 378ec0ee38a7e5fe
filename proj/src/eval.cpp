#include "irislab/eval.hpp"

#include <cmath>

#include "irislab/checkpoint.hpp"
#include "irislab/config.hpp"

namespace irislab {

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["images_per_prompt"] = images_per_prompt;
  j["overall_oracle"] = overall_oracle;
  nlohmann::ordered_json cats;
  for (std::size_t c = 0; c < kAllCategories.size(); ++c) {
    cats[std::string(category_name(kAllCategories[c]))] = {{"mean_oracle", category_oracle[c]},
                                                           {"prompts", category_prompts[c]}};
  }
  j["categories"] = std::move(cats);
  j["mean_sc_text"] = mean_sc_text;
  j["mean_sc_image"] = mean_sc_image;
  j["sc_image_stderr"] = sc_image_stderr;
  j["mean_color_entropy"] = mean_color_entropy;
  j["mean_intrinsic_return"] = mean_intrinsic_return;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"prompt", r.prompt},
                         {"category", category_name(r.category)},
                         {"samples", r.samples},
                         {"mean_oracle", r.mean_oracle}});
  }
  j["prompts"] = std::move(rows_json);
  return j;
}

EvalReport evaluate(const TrajectorySource& source, std::span<const Prompt> prompts, const EvalOptions& options) {
  if (prompts.empty()) throw std::invalid_argument("empty prompt set");
  if (options.images_per_prompt < 1) throw std::invalid_argument("images_per_prompt must be >= 1");
  const RngStream base = purpose_stream(options.eval_seed, StreamPurpose::kEval);

  EvalReport report;
  report.images_per_prompt = options.images_per_prompt;
  std::array<double, 4> cat_sum{};
  double sc_text_sum = 0.0, sc_image_sum = 0.0, entropy_sum = 0.0, return_sum = 0.0, oracle_sum = 0.0;
  std::size_t text_tokens = 0, image_tokens = 0, samples = 0;
  std::vector<double> per_image_sc;

  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const Prompt& prompt = prompts[p];
    PromptRow row{to_text(prompt.tokens), category_of(prompt.scene)};
    for (int j = 0; j < options.images_per_prompt; ++j) {
      const Trajectory traj = source(prompt, base.derive(p).derive(static_cast<std::uint64_t>(j)));
      const GridImage grid = decode_image(traj.image_tokens());
      const double score = oracle_reward(grid, prompt.scene, options.oracle);
      row.mean_oracle += score;
      row.samples += 1;
      entropy_sum += color_entropy(grid);
      return_sum += trajectory_return(traj, options.spec);

      const auto positions = traj.scored_positions();
      double image_sc = 0.0;
      std::size_t image_n = 0;
      for (std::size_t i = 0; i < positions.size(); ++i) {
        if (traj.tokens[positions[i]].segment == Segment::kText) {
          sc_text_sum += traj.token_sc[i];
          ++text_tokens;
        } else {
          image_sc += traj.token_sc[i];
          ++image_n;
        }
      }
      sc_image_sum += image_sc;
      image_tokens += image_n;
      per_image_sc.push_back(image_n ? image_sc / static_cast<double>(image_n) : 0.0);
      ++samples;
    }
    oracle_sum += row.mean_oracle;
    row.mean_oracle /= row.samples;
    const auto c = static_cast<std::size_t>(row.category);
    cat_sum[c] += row.mean_oracle;
    report.category_prompts[c] += 1;
    report.rows.push_back(std::move(row));
  }

  for (std::size_t c = 0; c < 4; ++c) {
    report.category_oracle[c] = report.category_prompts[c] ? cat_sum[c] / report.category_prompts[c] : 0.0;
  }
  const double n = static_cast<double>(samples);
  report.overall_oracle = oracle_sum / n;
  report.mean_sc_text = text_tokens ? sc_text_sum / static_cast<double>(text_tokens) : 0.0;
  report.mean_sc_image = image_tokens ? sc_image_sum / static_cast<double>(image_tokens) : 0.0;
  report.mean_color_entropy = entropy_sum / n;
  report.mean_intrinsic_return = return_sum / n;
  if (per_image_sc.size() > 1) {
    double mean = 0.0;
    for (double x : per_image_sc) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : per_image_sc) var += (x - mean) * (x - mean);
    var /= (n - 1.0);
    report.sc_image_stderr = std::sqrt(var / n);
  }
  return report;
}

EvalReport evaluate_policy(const PolicyParams& params, std::span<const Prompt> prompts,
                           const RolloutOptions& rollout, const EvalOptions& options) {
  return evaluate(
      [&](const Prompt& prompt, const RngStream& rng) { return generate(params, prompt, rng, rollout); }, prompts,
      options);
}

EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, std::span<const Prompt> prompts,
                               int images_per_prompt) {
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
  ResolvedConfig config;
  try {
    config = ResolvedConfig::from_json(ckpt.meta.config);
  } catch (const std::exception&) {
    config.policy = ckpt.params.config;
  }
  const TrainerConfig& t = config.trainer;
  RolloutOptions rollout{{t.max_text_len}, t.cot_enabled, t.reward};
  EvalOptions options{images_per_prompt, t.eval_seed, t.reward, {t.oracle_alpha, t.spatial_threshold}};
  return evaluate_policy(ckpt.params, prompts, rollout, options);
}

Trajectory ideal_trajectory(const Prompt& prompt) {
  Trajectory traj;
  traj.prompt = prompt;
  traj.tokens.push_back({vocab::kBoi, Segment::kText, true});
  const GridImage grid = render_ideal(prompt.scene);
  for (int c : grid.cells) traj.tokens.push_back({vocab::image_token(c), Segment::kImage, false});
  traj.behavior_log_probs.assign(kImageTokens, 0.0);
  traj.token_sc.assign(kImageTokens, 0.0);
  traj.token_entropy_gap.assign(kImageTokens, 0.0);
  return traj;
}

}  // namespace irislab
