#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irislab/core.hpp"
#include "irislab/domain.hpp"
#include "irislab/trajectory.hpp"

namespace irislab {

struct PolicyConfig {
  int d = 16;  // embedding width
  int k = 8;   // context window
  int h = 64;  // hidden units
  double init_scale = 0.08;
  int vocab_size = vocab::kSize;

  void validate() const;
  int input_width() const { return k * d + d; }
  bool operator==(const PolicyConfig&) const = default;
};

// Dense row-major matrix; vectors are 1 x n.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c) : name(std::move(n)), rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Tensor&) const = default;
};

/// Learnable parameters of the context-window policy. Gradients and optimizer
/// moments reuse this type.
struct PolicyParams {
  PolicyConfig config;
  Tensor token_embeddings;     // vocab x d
  Tensor prompt_pool_weights;  // d x d
  Tensor hidden_weights;       // (k*d + d) x h
  Tensor hidden_bias;          // 1 x h
  Tensor output_weights;       // h x vocab
  Tensor output_bias;          // 1 x vocab

  static PolicyParams zeros(const PolicyConfig& config);

  std::array<Tensor*, 6> tensors();
  std::array<const Tensor*, 6> tensors() const;
  std::size_t parameter_count() const;
  // FNV-1a over the raw bytes of every entry, in tensor order.
  std::uint64_t hash() const;
  bool all_finite() const;
  void set_zero();
  void add_scaled(const PolicyParams& other, double scale);
  double norm() const;
  bool operator==(const PolicyParams&) const = default;
};

PolicyParams init_params(const RngStream& rng, const PolicyConfig& config);

// Mean prompt-token embedding transformed by prompt_pool_weights.
std::vector<double> prompt_feature(const PolicyParams& params, const Prompt& prompt);

// Last k tokens before `position`, left-padded with <PAD>.
std::vector<TokenId> context_window(std::span<const TokenRecord> tokens, std::size_t position, int k);

CategoricalDist forward(const PolicyParams& params, const Prompt& prompt, std::span<const TokenId> context,
                        Segment segment);

/// Intermediate values of one forward evaluation, kept for the backward pass.
struct ForwardCache {
  std::vector<TokenId> context;
  std::vector<double> input;   // k*d + d
  std::vector<double> hidden;  // tanh activations
  CategoricalDist dist;
};

ForwardCache forward_cached(const PolicyParams& params, std::span<const double> feature,
                            std::span<const TokenId> context, Segment segment);

// Forward evaluation at every scored position of a trajectory, teacher-forced.
struct TrajectoryPass {
  std::vector<double> feature;
  std::vector<ForwardCache> steps;  // one per scored token
};

TrajectoryPass run_trajectory(const PolicyParams& params, const Trajectory& trajectory);

// Log-probabilities of the scored tokens under `params`.
std::vector<double> sequence_log_probs(const PolicyParams& params, const Trajectory& trajectory);

/// Upstream gradient for one scored token: dL/d log pi(o_t), plus optionally
/// dL/dp over the segment's active set (empty when unused).
struct TokenUpstream {
  double d_log_prob = 0.0;
  std::vector<double> d_probs;
};

// Accumulates into `grad` using a pass computed by run_trajectory.
void accumulate_backward(const PolicyParams& params, const Trajectory& trajectory, const TrajectoryPass& pass,
                         std::span<const TokenUpstream> upstream, PolicyParams& grad);

PolicyParams backward(const PolicyParams& params, const Trajectory& trajectory,
                      std::span<const TokenUpstream> upstream);

}  // namespace irislab
