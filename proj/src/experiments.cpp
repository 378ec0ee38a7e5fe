#include "irislab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/core.h>

#include "irislab/rollout.hpp"

namespace irislab {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<AblationArm> canonical_arms() {
  using M = RewardMode;
  const RewardSpec both(M::kNSC, M::kNSC);
  return {
      {"nsc_both_cot", both, true, RewardSource::kIntrinsic, {}},
      {"no_cot", both, false, RewardSource::kIntrinsic, {"trainer.cot_enabled"}},
      {"text_nsc_only", RewardSpec(M::kNSC, M::kOff), true, RewardSource::kIntrinsic, {"reward.image_mode"}},
      {"image_nsc_only", RewardSpec(M::kOff, M::kNSC), true, RewardSource::kIntrinsic, {"reward.text_mode"}},
      {"text_nsc_image_sc", RewardSpec(M::kNSC, M::kSC), true, RewardSource::kIntrinsic, {"reward.image_mode"}},
      {"image_nsc_text_sc", RewardSpec(M::kSC, M::kNSC), true, RewardSource::kIntrinsic, {"reward.text_mode"}},
      {"backward_kl", RewardSpec(M::kNSC, M::kNSC, KlVariant::kBackward), true, RewardSource::kIntrinsic,
       {"reward.variant"}},
      {"oracle_external", both, true, RewardSource::kOracleExternal, {"trainer.reward_source"}},
  };
}

ResolvedConfig arm_config(const ResolvedConfig& base, const AblationArm& arm) {
  ResolvedConfig c = base;
  const RewardSpec& b = base.trainer.reward;
  c.trainer.reward = RewardSpec(arm.spec.text_mode(), arm.spec.image_mode(), arm.spec.variant(), b.length_normalized());
  c.trainer.cot_enabled = arm.cot_enabled;
  c.trainer.reward_source = arm.source;
  return c;
}

namespace {

void diff_into(const json& a, const json& b, const std::string& prefix, std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (const auto& [k, v] : a.items()) keys.insert(k);
    for (const auto& [k, v] : b.items()) keys.insert(k);
    for (const auto& k : keys) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (!a.contains(k) || !b.contains(k)) {
        out.push_back(path);
        continue;
      }
      diff_into(a[k], b[k], path, out);
    }
    return;
  }
  if (a != b) out.push_back(prefix);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ArmRow row_from_eval(const std::string& name, const json& e) {
  ArmRow r;
  r.name = name;
  r.step = e.at("step").get<int>();
  r.oracle = e.at("overall_oracle").get<double>();
  r.color_entropy = e.at("mean_color_entropy").get<double>();
  r.sc_text = e.at("mean_sc_text").get<double>();
  r.sc_image = e.at("mean_sc_image").get<double>();
  r.intrinsic_return = e.at("mean_intrinsic_return").get<double>();
  return r;
}

}  // namespace

std::vector<std::string> config_diff(const json& a, const json& b) {
  std::vector<std::string> out;
  diff_into(a, b, "", out);
  return out;
}

ComparisonTable build_comparison(const std::vector<AblationArm>& arms, const std::vector<fs::path>& run_dirs,
                                 TableMode mode) {
  if (arms.size() != run_dirs.size()) throw std::invalid_argument("arms and run dirs differ in length");
  if (arms.empty()) throw std::invalid_argument("no arms");
  ComparisonTable table;
  table.mode = mode;
  const json reference = read_json(run_dirs.front() / "config.json");
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const json config = read_json(run_dirs[i] / "config.json");
    const int final_step = config.at("trainer").at("total_steps").get<int>();
    ArmRow row;
    if (mode == TableMode::kFixedStep) {
      row = row_from_eval(arms[i].name, read_json(run_dirs[i] / "eval" / fmt::format("step_{}.json", final_step)));
    } else {
      std::vector<std::pair<int, fs::path>> evals;
      for (const auto& entry : fs::directory_iterator(run_dirs[i] / "eval")) {
        const std::string stem = entry.path().stem().string();
        if (entry.path().extension() != ".json" || stem.rfind("step_", 0) != 0) continue;
        evals.emplace_back(std::stoi(stem.substr(5)), entry.path());
      }
      if (evals.empty()) throw std::runtime_error("no eval reports in " + run_dirs[i].string());
      std::sort(evals.begin(), evals.end());
      bool first = true;
      for (const auto& [step, path] : evals) {
        ArmRow candidate = row_from_eval(arms[i].name, read_json(path));
        if (first || candidate.oracle > row.oracle) row = candidate;
        first = false;
      }
    }
    row.config_diff = config_diff(reference, config);
    const std::set<std::string> allowed(arms[i].axis.begin(), arms[i].axis.end());
    row.diff_within_axis = std::all_of(row.config_diff.begin(), row.config_diff.end(),
                                       [&](const std::string& k) { return allowed.count(k) > 0; });
    table.controlled = table.controlled && row.diff_within_axis;
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::ordered_json ComparisonTable::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode == TableMode::kFixedStep ? "fixed_step" : "best_step";
  j["controlled"] = controlled;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"arm", r.name},
                   {"step", r.step},
                   {"oracle", r.oracle},
                   {"color_entropy", r.color_entropy},
                   {"sc_text", r.sc_text},
                   {"sc_image", r.sc_image},
                   {"intrinsic_return", r.intrinsic_return},
                   {"config_diff", r.config_diff},
                   {"diff_within_axis", r.diff_within_axis}});
  }
  j["arms"] = std::move(arr);
  return j;
}

std::string ComparisonTable::to_text() const {
  std::string out = fmt::format("mode: {}\n", mode == TableMode::kFixedStep ? "fixed step" : "best step (by oracle)");
  out += fmt::format("{:<20} {:>6} {:>8} {:>9} {:>9} {:>9} {:>10}  {}\n", "arm", "step", "oracle", "entropy",
                     "sc_text", "sc_image", "return", "config diff");
  for (const auto& r : rows) {
    std::string diff;
    for (const auto& k : r.config_diff) diff += (diff.empty() ? "" : ",") + k;
    if (diff.empty()) diff = "-";
    if (!r.diff_within_axis) diff += " (outside axis)";
    out += fmt::format("{:<20} {:>6} {:>8.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>10.4f}  {}\n", r.name, r.step, r.oracle,
                       r.color_entropy, r.sc_text, r.sc_image, r.intrinsic_return, diff);
  }
  return out;
}

SuiteResult run_ablation_suite(const ResolvedConfig& base, const std::vector<AblationArm>& arms,
                               const fs::path& out_dir, const RunOptions& options) {
  std::set<std::string> names;
  for (const auto& arm : arms) {
    if (arm.name.empty()) throw std::invalid_argument("arm name must not be empty");
    if (!names.insert(arm.name).second) throw std::invalid_argument("duplicate arm name: " + arm.name);
  }
  if (arms.empty()) throw std::invalid_argument("no arms");

  SuiteResult result;
  for (const auto& arm : arms) result.run_dirs.push_back(out_dir / arm.name);

  // Concurrency across arms; each arm trains single-threaded so the total stays bounded.
  const int arm_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(arms.size())));
  RunOptions inner;
  inner.workers = arm_workers > 1 ? 1 : options.workers;
  parallel_for(arms.size(), arm_workers, [&](std::size_t i) {
    train(arm_config(base, arms[i]), result.run_dirs[i], inner);
  });

  result.table = build_comparison(arms, result.run_dirs, TableMode::kFixedStep);
  const ComparisonTable best = build_comparison(arms, result.run_dirs, TableMode::kBestStep);
  fs::create_directories(out_dir);
  write_text(out_dir / "comparison.json", result.table.to_json().dump(2) + "\n");
  write_text(out_dir / "comparison.txt", result.table.to_text());
  write_text(out_dir / "comparison_best_step.json", best.to_json().dump(2) + "\n");
  write_text(out_dir / "comparison_best_step.txt", best.to_text());
  return result;
}

Fig2Summary run_fig2_analog(const ResolvedConfig& config, const fs::path& out_dir, const RunOptions& options) {
  ResolvedConfig c = config;
  c.trainer.reward_source = RewardSource::kOracleExternal;
  if (c.trainer.eval_every <= 0) c.trainer.eval_every = std::max(1, c.trainer.total_steps);

  Fig2Summary summary;
  summary.run_dir = out_dir / "run";
  const TrainResult run = train(c, summary.run_dir, options);

  summary.curve_path = out_dir / "fig2_curve.tsv";
  std::string curve = "step\tmean_sc_image\tmean_oracle_reward\n";
  for (const auto& r : run.records) {
    curve += fmt::format("{}\t{:.17g}\t{:.17g}\n", r.step, r.mean_sc_image, r.mean_oracle_reward);
  }
  write_text(summary.curve_path, curve);
  summary.rows = run.records.size();

  if (!run.records.empty()) {
    const MetricsRecord& first = run.records.front();
    summary.train_step0_sc_image = first.mean_sc_image;
    summary.train_step0_stderr = first.extra.at("diagnostics").at("sc_image_stderr").get<double>();
    const json eval = read_json(summary.run_dir / "eval" / "step_0.json");
    summary.eval_step0_sc_image = eval.at("mean_sc_image").get<double>();
    summary.eval_step0_stderr = eval.at("sc_image_stderr").get<double>();
    const double bound = 4.0 * std::hypot(summary.train_step0_stderr, summary.eval_step0_stderr);
    summary.step0_consistent = std::abs(summary.train_step0_sc_image - summary.eval_step0_sc_image) <= bound;
  }

  nlohmann::ordered_json j;
  j["rows"] = summary.rows;
  j["train_step0_sc_image"] = summary.train_step0_sc_image;
  j["train_step0_stderr"] = summary.train_step0_stderr;
  j["eval_step0_sc_image"] = summary.eval_step0_sc_image;
  j["eval_step0_stderr"] = summary.eval_step0_stderr;
  j["step0_consistent"] = summary.step0_consistent;
  write_text(out_dir / "fig2_summary.json", j.dump(2) + "\n");
  return summary;
}

}  // namespace irislab
