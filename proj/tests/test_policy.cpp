#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "irislab/checkpoint.hpp"
#include "irislab/policy.hpp"
#include "irislab/rollout.hpp"

using namespace irislab;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

PolicyConfig tiny() {
  PolicyConfig c;
  c.d = 4;
  c.k = 2;
  c.h = 8;
  c.init_scale = 0.4;
  return c;
}

Trajectory sample(const PolicyParams& params, const std::string& prompt, std::uint64_t seed, bool cot = true) {
  RolloutOptions o;
  o.cot_enabled = cot;
  o.limits.max_text_len = 6;
  return generate(params, parse_prompt(prompt), derive_stream(seed, 0), o);
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("irislab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("parameter count and init") {
  const PolicyConfig c;
  const PolicyParams p = init_params(derive_stream(1, 1), c);
  const std::size_t v = 20, d = 16, k = 8, h = 64;
  CHECK(p.parameter_count() == v * d + d * d + (k * d + d) * h + h + h * v + v);
  CHECK(p == init_params(derive_stream(1, 1), c));
  CHECK(p.hash() == init_params(derive_stream(1, 1), c).hash());
  CHECK(p != init_params(derive_stream(2, 1), c));
  for (double b : p.hidden_bias.data) CHECK(b == 0.0);
  for (double w : p.hidden_weights.data) CHECK(std::abs(w) <= c.init_scale);

  PolicyConfig bad = c;
  bad.h = 0;
  CHECK_THROWS_AS(init_params(derive_stream(1, 1), bad), std::invalid_argument);
}

TEST_CASE("zero parameters give uniform outputs over the active set") {
  PolicyConfig c;
  c.init_scale = 0.0;
  const PolicyParams p = init_params(derive_stream(1, 1), c);
  const Prompt prompt = parse_prompt("one red above one blue");
  const std::vector<TokenId> ctx(static_cast<std::size_t>(c.k), vocab::kPad);
  for (Segment s : {Segment::kText, Segment::kImage}) {
    const auto dist = forward(p, prompt, ctx, s);
    CHECK(dist.active_ids() == vocab::active_set(s));
    for (double x : dist.probs()) CHECK(x == 1.0 / static_cast<double>(dist.size()));
  }
}

TEST_CASE("forward distributions are normalized over the segment vocabulary") {
  const PolicyParams p = init_params(derive_stream(3, 1), PolicyConfig{});
  std::mt19937_64 gen(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<TokenId> ctx(8);
    for (auto& t : ctx) t = static_cast<TokenId>(gen() % vocab::kSize);
    const Segment s = i % 2 ? Segment::kText : Segment::kImage;
    const auto dist = forward(p, parse_prompt("two green"), ctx, s);
    double sum = 0.0;
    for (double x : dist.probs()) sum += x;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    CHECK(dist.active_ids() == vocab::active_set(s));
  }
}

TEST_CASE("image-only output weights do not affect text outputs") {
  PolicyParams p = init_params(derive_stream(3, 1), PolicyConfig{});
  const Prompt prompt = parse_prompt("one blue");
  const std::vector<TokenId> ctx = {19, 19, 19, 19, 19, 0, 3, 13};
  const auto before = forward(p, prompt, ctx, Segment::kText);
  const auto image_before = forward(p, prompt, ctx, Segment::kImage);
  for (std::size_t r = 0; r < p.output_weights.rows; ++r) p.output_weights.at(r, vocab::kFirstImage + 2) += 0.7;
  p.output_bias.data[vocab::kFirstImage + 2] -= 1.3;
  CHECK(forward(p, prompt, ctx, Segment::kText).probs() == before.probs());
  CHECK(forward(p, prompt, ctx, Segment::kImage).probs() != image_before.probs());
}

TEST_CASE("context window pads on the left") {
  const std::vector<TokenRecord> toks = {{0, Segment::kText, false}, {3, Segment::kText, false}};
  CHECK(context_window(toks, 0, 3) == std::vector<TokenId>{19, 19, 19});
  CHECK(context_window(toks, 2, 3) == std::vector<TokenId>{19, 0, 3});
  CHECK(context_window(toks, 2, 1) == std::vector<TokenId>{3});
}

TEST_CASE("sequence log-probs reproduce the recorded behavior values") {
  const PolicyParams p = init_params(derive_stream(4, 1), PolicyConfig{});
  const Trajectory t = sample(p, "one red left-of one green", 8);
  const auto lp = sequence_log_probs(p, t);
  REQUIRE(lp.size() == t.behavior_log_probs.size());
  for (std::size_t i = 0; i < lp.size(); ++i) {
    CHECK(lp[i] == t.behavior_log_probs[i]);
    CHECK(std::exp(lp[i]) > 0.0);
    CHECK(std::exp(lp[i]) <= 1.0);
  }
}

TEST_CASE("backward with zero upstream is zero") {
  const PolicyParams p = init_params(derive_stream(4, 1), tiny());
  const Trajectory t = sample(p, "two blue", 3);
  const std::vector<TokenUpstream> up(t.scored_count());
  CHECK(backward(p, t, up).norm() == 0.0);
}

TEST_CASE("backward matches central finite differences") {
  const PolicyParams p = init_params(derive_stream(5, 1), tiny());
  const Trajectory t = sample(p, "one yellow above one red", 17);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TokenUpstream> up(t.scored_count());
  const auto positions = t.scored_positions();
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i].d_log_prob = u(gen);
    up[i].d_probs.resize(vocab::active_set(t.tokens[positions[i]].segment).size());
    for (double& x : up[i].d_probs) x = u(gen);
  }
  // L = sum_t a_t log p(o_t) + sum_t b_t . p_t
  auto loss = [&](const PolicyParams& q) {
    const TrajectoryPass pass = run_trajectory(q, t);
    double l = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) {
      const auto& dist = pass.steps[i].dist;
      l += up[i].d_log_prob * std::log(dist.prob_of(t.tokens[positions[i]].id));
      for (std::size_t j = 0; j < dist.size(); ++j) l += up[i].d_probs[j] * dist[j];
    }
    return l;
  };
  const PolicyParams grad = backward(p, t, up);
  PolicyParams probe = p;
  const double h = 1e-5;
  double worst = 0.0;
  auto probe_t = probe.tensors();
  const auto grad_t = grad.tensors();
  for (std::size_t k = 0; k < probe_t.size(); ++k) {
    for (std::size_t i = 0; i < probe_t[k]->data.size(); ++i) {
      const double saved = probe_t[k]->data[i];
      probe_t[k]->data[i] = saved + h;
      const double up_l = loss(probe);
      probe_t[k]->data[i] = saved - h;
      const double down_l = loss(probe);
      probe_t[k]->data[i] = saved;
      const double numeric = (up_l - down_l) / (2 * h);
      const double a = grad_t[k]->data[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("text-only loss leaves image output columns untouched") {
  const PolicyParams p = init_params(derive_stream(6, 1), tiny());
  Trajectory t;
  for (std::uint64_t s = 0; s < 50 && t.text_tokens().empty(); ++s) t = sample(p, "one red", s);
  REQUIRE_FALSE(t.text_tokens().empty());
  std::vector<TokenUpstream> up(t.scored_count());
  const auto positions = t.scored_positions();
  for (std::size_t i = 0; i < up.size(); ++i) {
    if (t.tokens[positions[i]].segment == Segment::kText) up[i].d_log_prob = 1.0;
  }
  const PolicyParams g = backward(p, t, up);
  CHECK(g.norm() > 0.0);
  for (std::size_t r = 0; r < g.output_weights.rows; ++r) {
    for (TokenId id : vocab::image_active_set()) CHECK(g.output_weights.at(r, id) == 0.0);
  }
  for (TokenId id : vocab::image_active_set()) CHECK(g.output_bias.data[id] == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const fs::path dir = temp_dir("ckpt");
  PolicyParams p = init_params(derive_stream(7, 1), tiny());
  p.output_bias.data[0] = 0.1 + 0.2;  // not exactly representable in short decimal
  p.hidden_bias.data[1] = -1e-310;    // subnormal
  OptimizerState opt = OptimizerState::fresh(p.config);
  opt.step = 12;
  opt.first_moment.hidden_weights.data[3] = 1.0 / 3.0;
  const CheckpointMeta meta{5, nlohmann::json{{"policy", policy_config_to_json(p.config)}}, "abc"};
  save_checkpoint(dir / "c", p, &opt, meta);
  const LoadedCheckpoint loaded = load_checkpoint(dir / "c");
  CHECK(loaded.params == p);
  CHECK(loaded.optimizer == opt);
  CHECK_FALSE(loaded.optimizer_missing);
  CHECK(loaded.meta.step == 5);
  CHECK(loaded.meta.config_hash == "abc");

  SECTION("missing optimizer state") {
    save_checkpoint(dir / "noopt", p, nullptr, meta);
    const LoadedCheckpoint l = load_checkpoint(dir / "noopt");
    CHECK(l.optimizer_missing);
    CHECK(l.optimizer == OptimizerState::fresh(p.config));
  }
  SECTION("tampered shape") {
    std::ifstream in(dir / "c");
    nlohmann::json j = nlohmann::json::parse(in);
    j["tensors"][2]["shape"][0] = 3;
    std::ofstream(dir / "bad") << j.dump();
    try {
      load_checkpoint(dir / "bad");
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.code() == CheckpointError::Code::kShapeMismatch);
      CHECK_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("shape mismatch"));
    }
  }
  SECTION("version and corruption") {
    std::ifstream in(dir / "c");
    nlohmann::json j = nlohmann::json::parse(in);
    j["format_version"] = 99;
    std::ofstream(dir / "v") << j.dump();
    std::ofstream(dir / "junk") << "{not json";
    try {
      load_checkpoint(dir / "v");
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.code() == CheckpointError::Code::kVersionMismatch);
    }
    try {
      load_checkpoint(dir / "junk");
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.code() == CheckpointError::Code::kCorrupt);
    }
    try {
      load_checkpoint(dir / "absent");
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.code() == CheckpointError::Code::kIo);
    }
  }
}
