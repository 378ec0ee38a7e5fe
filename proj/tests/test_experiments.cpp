#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "irislab/checkpoint.hpp"
#include "irislab/eval.hpp"
#include "irislab/experiments.hpp"
#include "irislab/trainer.hpp"

using namespace irislab;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

// Key order is not preserved when a log is read back.
bool same_json(const nlohmann::ordered_json& a, const nlohmann::ordered_json& b) {
  return nlohmann::json::parse(a.dump()) == nlohmann::json::parse(b.dump());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("irislab_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ResolvedConfig quick_config(int steps) {
  ResolvedConfig c;
  c.policy.d = 4;
  c.policy.k = 2;
  c.policy.h = 8;
  c.trainer.group_size = 3;
  c.trainer.prompts_per_step = 2;
  c.trainer.total_steps = steps;
  c.trainer.eval_every = 2;
  c.trainer.checkpoint_every = 2;
  c.trainer.eval_images_per_prompt = 1;
  c.trainer.max_text_len = 4;
  c.trainer.learning_rate = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("eval of an ideal renderer scores 1") {
  const auto prompts = default_eval_prompts();
  const EvalReport r = evaluate([](const Prompt& p, const RngStream&) { return ideal_trajectory(p); }, prompts, {});
  CHECK(r.overall_oracle == 1.0);
  for (double c : r.category_oracle) CHECK(c == 1.0);
  CHECK(r.category_prompts == std::array<int, 4>{10, 10, 10, 10});
  for (const auto& row : r.rows) CHECK(row.samples == 4);
}

TEST_CASE("eval of a zero-initialized policy has zero self-certainty") {
  PolicyConfig pc;
  pc.init_scale = 0.0;
  const PolicyParams p = init_params(derive_stream(1, 1), pc);
  const auto prompts = default_eval_prompts();
  const std::vector<Prompt> few(prompts.begin(), prompts.begin() + 8);
  const EvalReport r = evaluate_policy(p, few, {}, {});
  CHECK(r.mean_sc_text == 0.0);
  CHECK(r.mean_sc_image == 0.0);
  CHECK(r.mean_intrinsic_return == 0.0);
  for (const auto& row : r.rows) CHECK(row.samples == 4);
  CHECK_THROWS_WITH(evaluate_policy(p, std::vector<Prompt>{}, {}, {}), "empty prompt set");
}

TEST_CASE("eval samples are reproducible") {
  const PolicyParams p = init_params(derive_stream(2, 1), PolicyConfig{});
  const auto prompts = default_eval_prompts();
  const std::vector<Prompt> few(prompts.begin(), prompts.begin() + 4);
  CHECK(evaluate_policy(p, few, {}, {}).to_json() == evaluate_policy(p, few, {}, {}).to_json());
}

TEST_CASE("training with zero steps writes only the initial state") {
  const fs::path dir = fresh_dir("zero");
  const TrainResult r = train(quick_config(0), dir);
  CHECK(r.records.empty());
  CHECK(fs::exists(dir / "checkpoints" / "step_0"));
  CHECK(slurp(dir / "metrics.jsonl") == "{\"schema_version\":1}\n");
  CHECK(fs::exists(dir / "config.json"));
}

TEST_CASE("training is deterministic across runs and worker counts") {
  const ResolvedConfig c = quick_config(4);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), w = fresh_dir("det_w");
  const TrainResult ra = train(c, a);
  train(c, b);
  train(c, w, RunOptions{4, nullptr});
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
  CHECK(slurp(a / "metrics.jsonl") == slurp(w / "metrics.jsonl"));
  CHECK(slurp(a / "checkpoints" / "step_4") == slurp(w / "checkpoints" / "step_4"));
  CHECK(ra.records.size() == 4);
  CHECK(fs::exists(a / "eval" / "step_0.json"));
  CHECK(fs::exists(a / "eval" / "step_2.json"));
  CHECK(fs::exists(a / "eval" / "step_4.json"));
  CHECK(ra.records[0].extra.contains("eval"));
  CHECK_FALSE(ra.records[1].extra.contains("eval"));

  // the final checkpoint reproduces the in-memory parameters
  CHECK(load_checkpoint(ra.final_checkpoint).params == ra.params);
  const MetricsLog log = read_metrics(a / "metrics.jsonl");
  REQUIRE(log.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same_json(log.records[i].to_json(), ra.records[i].to_json()));
}

TEST_CASE("a single inner epoch never clips") {
  ResolvedConfig c = quick_config(2);
  c.trainer.inner_epochs = 1;
  const TrainResult r = train(c, fresh_dir("mu1"));
  for (const auto& rec : r.records) CHECK(rec.clip_fraction == 0.0);
}

TEST_CASE("backward-kl rewards are entropy gaps") {
  const PolicyParams p = init_params(derive_stream(3, 1), PolicyConfig{});
  RolloutOptions o;
  o.spec = RewardSpec(RewardMode::kNSC, RewardMode::kNSC, KlVariant::kBackward);
  const Trajectory t = generate(p, parse_prompt("one red above one green"), derive_stream(3, 3), o);
  const TrajectoryPass pass = run_trajectory(p, t);
  double u = 0.0;
  for (std::size_t i = 0; i < pass.steps.size(); ++i) {
    const auto& dist = pass.steps[i].dist;
    const double gap = entropy(dist) - std::log(static_cast<double>(dist.size()));
    CHECK_THAT(t.token_entropy_gap[i], WithinAbs(gap, 1e-12));
    u += -gap;
  }
  CHECK_THAT(t.intrinsic_return, WithinAbs(u, 1e-9));
}

TEST_CASE("canonical arms") {
  const auto arms = canonical_arms();
  REQUIRE(arms.size() == 8);
  std::set<std::string> names;
  for (const auto& a : arms) names.insert(a.name);
  CHECK(names.size() == 8);

  const ResolvedConfig base;
  const auto ref = arm_config(base, arms[0]).to_json();
  for (const auto& arm : arms) {
    INFO(arm.name);
    CHECK(config_diff(ref, arm_config(base, arm).to_json()) == arm.axis);
  }
  CHECK(config_diff(ref, arm_config(base, arms[1]).to_json()) == std::vector<std::string>{"trainer.cot_enabled"});
}

TEST_CASE("duplicate arm names are rejected") {
  auto arms = canonical_arms();
  arms[3].name = arms[0].name;
  CHECK_THROWS_WITH(run_ablation_suite(quick_config(1), arms, fresh_dir("dup")),
                    Catch::Matchers::ContainsSubstring("duplicate arm name"));
}

TEST_CASE("ablation suite emits run dirs and both tables") {
  const fs::path out = fresh_dir("suite");
  const SuiteResult r = run_ablation_suite(quick_config(2), canonical_arms(), out, RunOptions{2, nullptr});
  CHECK(r.run_dirs.size() == 8);
  for (const auto& d : r.run_dirs) CHECK(fs::exists(d / "metrics.jsonl"));
  CHECK(r.table.rows.size() == 8);
  CHECK(r.table.controlled);
  for (const auto& row : r.table.rows) CHECK(row.step == 2);
  CHECK(fs::exists(out / "comparison.json"));
  CHECK(fs::exists(out / "comparison.txt"));
  CHECK(fs::exists(out / "comparison_best_step.json"));
  const auto best = nlohmann::json::parse(slurp(out / "comparison_best_step.json"));
  CHECK(best["mode"] == "best_step");

  // each arm reproduces from its saved config
  std::ifstream in(r.run_dirs[4] / "config.json");
  const ResolvedConfig saved = ResolvedConfig::from_json(nlohmann::json::parse(in));
  const fs::path again = fresh_dir("suite_again");
  train(saved, again);
  CHECK(slurp(again / "metrics.jsonl") == slurp(r.run_dirs[4] / "metrics.jsonl"));

  // an arm that drifts outside its axis is flagged
  auto arms = canonical_arms();
  arms[1].axis.clear();
  CHECK_FALSE(build_comparison(arms, r.run_dirs, TableMode::kFixedStep).controlled);
}

TEST_CASE("fig2 analog writes one curve row per step") {
  const fs::path out = fresh_dir("fig2");
  ResolvedConfig c = quick_config(3);
  c.trainer.eval_images_per_prompt = 2;
  const Fig2Summary s = run_fig2_analog(c, out);
  CHECK(s.rows == 3);
  std::ifstream in(s.curve_path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4);
  std::ifstream cfg(s.run_dir / "config.json");
  CHECK(nlohmann::json::parse(cfg)["trainer"]["reward_source"] == "oracle_external");
  CHECK(s.step0_consistent);
  CHECK(fs::exists(out / "fig2_summary.json"));
}
