#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "irislab/grpo.hpp"
#include "irislab/policy.hpp"

namespace irislab {

/// Fully materialized run configuration. Canonical JSON layout:
///   { "paths": {...}, "policy": {...}, "reward": {...}, "seed": N, "trainer": {...} }
/// with keys sorted at every level.
struct ResolvedConfig {
  PolicyConfig policy;
  TrainerConfig trainer;
  std::string eval_prompts;  // empty selects the built-in 40-prompt set

  nlohmann::json to_json() const;
  // Strict: every key must be present, unknown keys are rejected.
  static ResolvedConfig from_json(const nlohmann::json& j);
  std::string canonical() const { return to_json().dump(); }
  // FNV-1a 64 of the canonical serialization, as 16 hex digits.
  std::string hash() const;
  void validate() const;
};

std::string fnv1a_hex(std::string_view bytes);

// (dotted key, raw value) pairs, e.g. {"trainer.kl_beta", "0"}. Values are
// parsed as JSON when possible and otherwise taken as strings.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Precedence: flags > file > IRIS_LAB_SEED > built-in defaults. Errors name
/// the key and the violated constraint.
ResolvedConfig resolve_config(const std::optional<std::string>& file_path, const ConfigOverrides& overrides,
                              const std::optional<std::string>& env_seed = std::nullopt);

// Reads IRIS_LAB_SEED from the process environment.
std::optional<std::string> env_seed_override();

// Writes config.json (pretty-printed canonical form) into run_dir.
void write_config_snapshot(const ResolvedConfig& config, const std::string& run_dir);

}  // namespace irislab
