#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "irislab/config.hpp"

using namespace irislab;
namespace fs = std::filesystem;

namespace {

std::string write_file(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("irislab_config_" + name);
  std::ofstream(p) << body;
  return p.string();
}

}  // namespace

TEST_CASE("empty file and no flags give the defaults") {
  const ResolvedConfig c = resolve_config(write_file("empty.json", "{}"), {});
  CHECK(c.trainer.group_size == 8);
  CHECK(c.trainer.kl_beta == 0.01);
  CHECK(c.trainer.clip_epsilon == 0.2);
  CHECK(c.trainer.total_steps == 300);
  CHECK(c.trainer.seed == 1);
  CHECK(c.policy == PolicyConfig{});
  CHECK(c.hash() == ResolvedConfig{}.hash());
  CHECK(c.hash().size() == 16);
}

TEST_CASE("precedence") {
  const auto file = write_file("beta.json", R"({"trainer": {"kl_beta": 0.01}, "seed": 5})");
  const ResolvedConfig c = resolve_config(file, {{"trainer.kl_beta", "0"}});
  CHECK(c.trainer.kl_beta == 0.0);
  CHECK(c.trainer.seed == 5);
  CHECK(resolve_config(std::nullopt, {}, std::string("9")).trainer.seed == 9);
  CHECK(resolve_config(file, {}, std::string("9")).trainer.seed == 5);
  CHECK(resolve_config(file, {{"seed", "11"}}, std::string("9")).trainer.seed == 11);
  CHECK_THROWS_AS(resolve_config(std::nullopt, {}, std::string("x1")), std::invalid_argument);
}

TEST_CASE("rejections name the key and constraint") {
  CHECK_THROWS_WITH(resolve_config(write_file("eps.json", R"({"trainer": {"clip_epsilon": 1.5}})"), {}),
                    Catch::Matchers::ContainsSubstring("trainer.clip_epsilon") &&
                        Catch::Matchers::ContainsSubstring("(0, 1)"));
  CHECK_THROWS_WITH(resolve_config(write_file("unk.json", R"({"trainer": {"kl_betta": 0}})"), {}),
                    Catch::Matchers::ContainsSubstring("trainer.kl_betta: unknown key"));
  CHECK_THROWS_WITH(resolve_config(std::nullopt, {{"trainer.group_size", "\"eight\""}}),
                    Catch::Matchers::ContainsSubstring("trainer.group_size: type mismatch"));
  CHECK_THROWS_WITH(resolve_config(std::nullopt, {{"reward.text_mode", "\"OFF\""}, {"reward.image_mode", "\"OFF\""}}),
                    Catch::Matchers::ContainsSubstring("reward"));
  CHECK_THROWS_AS(resolve_config(write_file("bad.json", "{"), {}), std::invalid_argument);
}

TEST_CASE("canonical json round trips") {
  ResolvedConfig c;
  c.trainer.reward = RewardSpec(RewardMode::kSC, RewardMode::kNSC, KlVariant::kBackward, true);
  c.trainer.reward_source = RewardSource::kOracleExternal;
  c.trainer.cot_enabled = false;
  c.policy.h = 32;
  const ResolvedConfig back = ResolvedConfig::from_json(c.to_json());
  CHECK(back.canonical() == c.canonical());
  CHECK(back.hash() == c.hash());
  CHECK(back.hash() != ResolvedConfig{}.hash());

  nlohmann::json j = c.to_json();
  j["trainer"].erase("kl_beta");
  CHECK_THROWS_WITH(ResolvedConfig::from_json(j), Catch::Matchers::ContainsSubstring("trainer.kl_beta"));
}

TEST_CASE("snapshot is written to the run directory") {
  const fs::path dir = fs::temp_directory_path() / "irislab_config_snapshot";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ResolvedConfig c;
  c.trainer.seed = 42;
  write_config_snapshot(c, dir.string());
  std::ifstream in(dir / "config.json");
  const ResolvedConfig back = ResolvedConfig::from_json(nlohmann::json::parse(in));
  CHECK(back.hash() == c.hash());
}
