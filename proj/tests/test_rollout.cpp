#include <catch_amalgamated.hpp>

#include <algorithm>

#include "irislab/rollout.hpp"

using namespace irislab;

namespace {

const PolicyParams& default_params() {
  static const PolicyParams p = init_params(derive_stream(1, 1), PolicyConfig{});
  return p;
}

}  // namespace

TEST_CASE("cot disabled yields a forced boi and 64 image tokens") {
  RolloutOptions o;
  o.cot_enabled = false;
  const Trajectory t = generate(default_params(), parse_prompt("one red"), derive_stream(2, 0), o);
  CHECK(t.text_tokens().empty());
  CHECK(t.image_tokens().size() == 64);
  REQUIRE(t.tokens.front().id == vocab::kBoi);
  CHECK(t.tokens.front().forced);
  CHECK(t.scored_count() == 64);
  CHECK(t.behavior_log_probs.size() == 64);
}

TEST_CASE("text length limit forces boi") {
  RolloutOptions o;
  o.limits.max_text_len = 2;
  bool saw_forced = false;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Trajectory t = generate(default_params(), parse_prompt("two blue"), derive_stream(s, 0), o);
    validate_structure(t);
    const auto boi = std::find_if(t.tokens.begin(), t.tokens.end(), [](auto& r) { return r.id == vocab::kBoi; });
    REQUIRE(boi != t.tokens.end());
    REQUIRE(t.text_tokens().size() <= 2);
    if (boi->forced) {
      saw_forced = true;
      CHECK(t.text_tokens().size() == 2);
      CHECK(t.scored_count() == 2 + 64);
    } else {
      CHECK(t.scored_count() == t.text_tokens().size() + 1 + 64);
    }
  }
  CHECK(saw_forced);
}

TEST_CASE("zero parameters give zero self-certainty everywhere") {
  PolicyConfig c;
  c.init_scale = 0.0;
  const PolicyParams p = init_params(derive_stream(1, 1), c);
  const Trajectory t = generate(p, parse_prompt("one green above one red"), derive_stream(3, 0), {});
  for (double sc : t.token_sc) CHECK(sc == 0.0);
  CHECK(t.intrinsic_return == 0.0);
}

TEST_CASE("generation is deterministic and respects segment vocabularies") {
  const Prompt prompt = parse_prompt("one yellow left-of one blue");
  const Trajectory a = generate(default_params(), prompt, derive_stream(4, 9), {});
  const Trajectory b = generate(default_params(), prompt, derive_stream(4, 9), {});
  CHECK(a == b);
  CHECK(a.snapshot_hash == default_params().hash());
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Trajectory t = generate(default_params(), prompt, derive_stream(s, 1), {});
    validate_structure(t);
    for (const auto& tok : t.tokens) {
      const auto& active = vocab::active_set(tok.segment);
      REQUIRE(std::find(active.begin(), active.end(), tok.id) != active.end());
    }
  }
}

TEST_CASE("groups") {
  const Prompt prompt = parse_prompt("three red");
  const RngStream base = derive_stream(5, 5);
  const TrajectoryGroup serial = generate_group(default_params(), prompt, 8, base, {}, 1);
  REQUIRE(serial.members.size() == 8);
  for (const auto& m : serial.members) CHECK(m.image_tokens().size() == 64);
  const TrajectoryGroup parallel = generate_group(default_params(), prompt, 8, base, {}, 4);
  CHECK(parallel.members == serial.members);
  CHECK(serial.members[0] == generate(default_params(), prompt, base.derive(0), {}));
  CHECK_THROWS_WITH(generate_group(default_params(), prompt, 1, base, {}), "group size must allow normalization");
}

TEST_CASE("validate_structure rejects malformed trajectories") {
  Trajectory t = generate(default_params(), parse_prompt("one red"), derive_stream(6, 0), {});
  Trajectory missing_boi = t;
  missing_boi.tokens.erase(std::find_if(missing_boi.tokens.begin(), missing_boi.tokens.end(),
                                        [](auto& r) { return r.id == vocab::kBoi; }));
  CHECK_THROWS_WITH(validate_structure(missing_boi), "segment violation");
  Trajectory short_image = t;
  short_image.tokens.pop_back();
  CHECK_THROWS_WITH(validate_structure(short_image), "segment violation");
}
