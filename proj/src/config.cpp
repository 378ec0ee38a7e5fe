#include "irislab/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

#include "irislab/checkpoint.hpp"

namespace irislab {

using json = nlohmann::json;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

json ResolvedConfig::to_json() const {
  const TrainerConfig& t = trainer;
  json j;
  j["seed"] = t.seed;
  j["policy"] = policy_config_to_json(policy);
  j["reward"] = {{"text_mode", to_string(t.reward.text_mode())},
                 {"image_mode", to_string(t.reward.image_mode())},
                 {"variant", to_string(t.reward.variant())},
                 {"length_normalized", t.reward.length_normalized()}};
  j["trainer"] = {{"group_size", t.group_size},
                  {"clip_epsilon", t.clip_epsilon},
                  {"kl_beta", t.kl_beta},
                  {"learning_rate", t.learning_rate},
                  {"inner_epochs", t.inner_epochs},
                  {"prompts_per_step", t.prompts_per_step},
                  {"total_steps", t.total_steps},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_eps", t.adam_eps},
                  {"reward_source", to_string(t.reward_source)},
                  {"cot_enabled", t.cot_enabled},
                  {"max_text_len", t.max_text_len},
                  {"oracle_alpha", t.oracle_alpha},
                  {"spatial_threshold", t.spatial_threshold},
                  {"eval_every", t.eval_every},
                  {"checkpoint_every", t.checkpoint_every},
                  {"eval_images_per_prompt", t.eval_images_per_prompt},
                  {"eval_seed", t.eval_seed},
                  {"log_wall_time", t.log_wall_time}};
  j["paths"] = {{"eval_prompts", eval_prompts}};
  return j;
}

namespace {

// Merges `src` into `dst`, requiring every key of src to exist in dst with a
// compatible type. `prefix` is the dotted path used in error messages.
void merge_strict(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) throw std::invalid_argument(fmt::format("{}: expected an object", prefix.empty() ? "<root>" : prefix));
  for (const auto& [key, value] : src.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!dst.contains(key)) throw std::invalid_argument(fmt::format("{}: unknown key", path));
    json& slot = dst[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
      continue;
    }
    bool ok = false;
    if (slot.is_boolean()) ok = value.is_boolean();
    else if (slot.is_number_unsigned()) ok = value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    else if (slot.is_number_integer()) ok = value.is_number_integer();
    else if (slot.is_number_float()) ok = value.is_number();
    else if (slot.is_string()) ok = value.is_string();
    if (!ok) {
      throw std::invalid_argument(fmt::format("{}: type mismatch, expected {} but got {}", path,
                                              slot.is_number_unsigned() ? "non-negative integer" : slot.type_name(),
                                              value.type_name()));
    }
    if (slot.is_number_float()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
  }
}

void require_exact_keys(const json& j, const json& shape, const std::string& prefix) {
  for (const auto& [key, value] : shape.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!j.contains(key)) throw std::invalid_argument(fmt::format("{}: missing key", path));
    if (value.is_object()) require_exact_keys(j.at(key), value, path);
  }
  for (const auto& [key, value] : j.items()) {
    if (!shape.contains(key)) {
      throw std::invalid_argument(fmt::format("{}: unknown key", prefix.empty() ? key : prefix + "." + key));
    }
  }
}

template <typename T>
T field(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(fmt::format("{}.{}: type mismatch", section, key));
  }
}

}  // namespace

ResolvedConfig ResolvedConfig::from_json(const json& j) {
  require_exact_keys(j, ResolvedConfig{}.to_json(), "");
  ResolvedConfig c;
  try {
    c.policy = policy_config_from_json(j.at("policy"));
    c.trainer.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("policy/seed: type mismatch ({})", e.what()));
  }
  TrainerConfig& t = c.trainer;
  t.group_size = field<int>(j, "trainer", "group_size");
  t.clip_epsilon = field<double>(j, "trainer", "clip_epsilon");
  t.kl_beta = field<double>(j, "trainer", "kl_beta");
  t.learning_rate = field<double>(j, "trainer", "learning_rate");
  t.inner_epochs = field<int>(j, "trainer", "inner_epochs");
  t.prompts_per_step = field<int>(j, "trainer", "prompts_per_step");
  t.total_steps = field<int>(j, "trainer", "total_steps");
  t.adam_beta1 = field<double>(j, "trainer", "adam_beta1");
  t.adam_beta2 = field<double>(j, "trainer", "adam_beta2");
  t.adam_eps = field<double>(j, "trainer", "adam_eps");
  t.cot_enabled = field<bool>(j, "trainer", "cot_enabled");
  t.max_text_len = field<int>(j, "trainer", "max_text_len");
  t.oracle_alpha = field<double>(j, "trainer", "oracle_alpha");
  t.spatial_threshold = field<double>(j, "trainer", "spatial_threshold");
  t.eval_every = field<int>(j, "trainer", "eval_every");
  t.checkpoint_every = field<int>(j, "trainer", "checkpoint_every");
  t.eval_images_per_prompt = field<int>(j, "trainer", "eval_images_per_prompt");
  t.eval_seed = field<std::uint64_t>(j, "trainer", "eval_seed");
  t.log_wall_time = field<bool>(j, "trainer", "log_wall_time");

  auto named = [](const char* key, auto&& parse, const std::string& value) {
    try {
      return parse(value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("{}: {}", key, e.what()));
    }
  };
  t.reward_source = named("trainer.reward_source", parse_reward_source, field<std::string>(j, "trainer", "reward_source"));
  const RewardMode text = named("reward.text_mode", parse_reward_mode, field<std::string>(j, "reward", "text_mode"));
  const RewardMode image = named("reward.image_mode", parse_reward_mode, field<std::string>(j, "reward", "image_mode"));
  const KlVariant variant = named("reward.variant", parse_kl_variant, field<std::string>(j, "reward", "variant"));
  try {
    t.reward = RewardSpec(text, image, variant, field<bool>(j, "reward", "length_normalized"));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(fmt::format("reward.text_mode/reward.image_mode: {}", e.what()));
  }
  c.eval_prompts = field<std::string>(j, "paths", "eval_prompts");
  c.validate();
  return c;
}

void ResolvedConfig::validate() const {
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(fmt::format("policy: {}", e.what()));
  }
  trainer.validate();
}

std::string ResolvedConfig::hash() const { return fnv1a_hex(canonical()); }

std::optional<std::string> env_seed_override() {
  const char* v = std::getenv("IRIS_LAB_SEED");
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

ResolvedConfig resolve_config(const std::optional<std::string>& file_path, const ConfigOverrides& overrides,
                              const std::optional<std::string>& env_seed) {
  json merged = ResolvedConfig{}.to_json();

  if (env_seed) {
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(*env_seed, &used);
      if (used != env_seed->size()) throw std::invalid_argument("trailing characters");
      merged["seed"] = static_cast<std::uint64_t>(s);
    } catch (const std::exception&) {
      throw std::invalid_argument("IRIS_LAB_SEED: must be a non-negative integer");
    }
  }

  if (file_path) {
    std::ifstream in(*file_path);
    if (!in) throw std::invalid_argument("cannot open config file " + *file_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument(fmt::format("{}: malformed JSON ({})", *file_path, e.what()));
    }
    if (!file.is_null()) merge_strict(merged, file, "");
  }

  for (const auto& [key, raw] : overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    // Build {"a": {"b": value}} from "a.b".
    json patch = value;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      auto dot = key.find('.', start);
      parts.push_back(key.substr(start, dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    merge_strict(merged, patch, "");
  }

  return ResolvedConfig::from_json(merged);
}

void write_config_snapshot(const ResolvedConfig& config, const std::string& run_dir) {
  std::filesystem::create_directories(run_dir);
  const auto path = std::filesystem::path(run_dir) / "config.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config.to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace irislab
