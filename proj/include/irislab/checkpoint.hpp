#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "irislab/grpo.hpp"
#include "irislab/policy.hpp"

namespace irislab {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { kIo, kCorrupt, kVersionMismatch, kShapeMismatch };
  CheckpointError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct CheckpointMeta {
  std::int64_t step = 0;
  nlohmann::json config = nlohmann::json::object();  // resolved run config; must hold "policy"
  std::string config_hash;
};

struct LoadedCheckpoint {
  PolicyParams params;
  OptimizerState optimizer;
  bool optimizer_missing = false;  // fresh state was substituted
  CheckpointMeta meta;
};

nlohmann::json policy_config_to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

/// JSON text file: header {format_version, config, config_hash, step}, then
/// named tensors with declared shape and row-major data, then the optional
/// optimizer moments. Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const OptimizerState* optimizer, const CheckpointMeta& meta);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace irislab
