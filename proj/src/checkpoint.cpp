#include "irislab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace irislab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

nlohmann::json policy_config_to_json(const PolicyConfig& c) {
  return json{{"d", c.d}, {"k", c.k}, {"h", c.h}, {"init_scale", c.init_scale}, {"vocab_size", c.vocab_size}};
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.d = j.at("d").get<int>();
  c.k = j.at("k").get<int>();
  c.h = j.at("h").get<int>();
  c.init_scale = j.at("init_scale").get<double>();
  c.vocab_size = j.at("vocab_size").get<int>();
  return c;
}

namespace {

ordered_json tensors_to_json(const PolicyParams& p) {
  ordered_json arr = ordered_json::array();
  for (const Tensor* t : p.tensors()) {
    ordered_json entry;
    entry["name"] = t->name;
    entry["shape"] = {t->rows, t->cols};
    entry["data"] = t->data;
    arr.push_back(std::move(entry));
  }
  return arr;
}

void tensors_from_json(const json& arr, PolicyParams& p) {
  if (!arr.is_array() || arr.size() != p.tensors().size()) {
    throw CheckpointError(CheckpointError::Code::kShapeMismatch, "shape mismatch: unexpected tensor count");
  }
  auto targets = p.tensors();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Tensor& t = *targets[i];
    const json& entry = arr[i];
    if (entry.at("name").get<std::string>() != t.name) {
      throw CheckpointError(CheckpointError::Code::kCorrupt, "corrupt checkpoint: tensor order/name " + t.name);
    }
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols) {
      throw CheckpointError(CheckpointError::Code::kShapeMismatch, "shape mismatch in tensor " + t.name);
    }
    auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != t.data.size()) {
      throw CheckpointError(CheckpointError::Code::kShapeMismatch,
                            "shape mismatch: data length of tensor " + t.name);
    }
    t.data = std::move(data);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     const OptimizerState* optimizer, const CheckpointMeta& meta) {
  ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["config"] = meta.config;
  doc["config_hash"] = meta.config_hash;
  doc["step"] = meta.step;
  doc["policy"] = policy_config_to_json(params.config);
  doc["tensors"] = tensors_to_json(params);
  if (optimizer) {
    ordered_json opt;
    opt["step"] = optimizer->step;
    opt["first_moment"] = tensors_to_json(optimizer->first_moment);
    opt["second_moment"] = tensors_to_json(optimizer->second_moment);
    doc["optimizer"] = std::move(opt);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw CheckpointError(CheckpointError::Code::kIo, "cannot write " + tmp.string());
    out << doc.dump() << '\n';
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw CheckpointError(CheckpointError::Code::kIo, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw CheckpointError(CheckpointError::Code::kIo, "cannot move checkpoint into " + path.string());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError(CheckpointError::Code::kIo, "cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Code::kCorrupt, fmt::format("corrupt checkpoint: {}", e.what()));
  }

  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError(CheckpointError::Code::kVersionMismatch,
                            fmt::format("version mismatch: file has {}, expected {}", version,
                                        kCheckpointFormatVersion));
    }
    LoadedCheckpoint out;
    out.meta.step = doc.at("step").get<std::int64_t>();
    out.meta.config = doc.at("config");
    out.meta.config_hash = doc.at("config_hash").get<std::string>();
    PolicyConfig pc;
    try {
      pc = policy_config_from_json(doc.at("policy"));
      pc.validate();
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(CheckpointError::Code::kShapeMismatch, fmt::format("shape mismatch: {}", e.what()));
    }
    out.params = PolicyParams::zeros(pc);
    tensors_from_json(doc.at("tensors"), out.params);
    if (!out.params.all_finite()) throw CheckpointError(CheckpointError::Code::kCorrupt, "corrupt checkpoint: non-finite");

    out.optimizer = OptimizerState::fresh(pc);
    if (doc.contains("optimizer")) {
      const json& opt = doc["optimizer"];
      out.optimizer.step = opt.at("step").get<std::int64_t>();
      tensors_from_json(opt.at("first_moment"), out.optimizer.first_moment);
      tensors_from_json(opt.at("second_moment"), out.optimizer.second_moment);
    } else {
      out.optimizer_missing = true;
    }
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Code::kCorrupt, fmt::format("corrupt checkpoint: {}", e.what()));
  }
}

}  // namespace irislab
