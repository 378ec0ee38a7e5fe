#include "irislab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace irislab {

// ---------------------------------------------------------------------------
// Trajectory helpers
// ---------------------------------------------------------------------------

std::vector<std::size_t> Trajectory::scored_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].forced) out.push_back(i);
  }
  return out;
}

std::size_t Trajectory::scored_count() const {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.forced ? 0 : 1;
  return n;
}

std::vector<TokenId> Trajectory::image_tokens() const {
  std::vector<TokenId> out;
  for (const auto& t : tokens) {
    if (t.segment == Segment::kImage) out.push_back(t.id);
  }
  return out;
}

std::vector<TokenId> Trajectory::text_tokens() const {
  std::vector<TokenId> out;
  for (const auto& t : tokens) {
    if (t.segment == Segment::kText && t.id != vocab::kBoi) out.push_back(t.id);
  }
  return out;
}

void validate_structure(const Trajectory& t) {
  auto violation = [] { throw std::invalid_argument("segment violation"); };
  std::size_t i = 0;
  while (i < t.tokens.size() && t.tokens[i].id != vocab::kBoi) {
    const auto& tok = t.tokens[i];
    if (tok.segment != Segment::kText || !vocab::is_text_word(tok.id) || tok.forced) violation();
    ++i;
  }
  if (i == t.tokens.size() || t.tokens[i].segment != Segment::kText) violation();
  ++i;
  if (t.tokens.size() - i != static_cast<std::size_t>(kImageTokens)) violation();
  for (; i < t.tokens.size(); ++i) {
    const auto& tok = t.tokens[i];
    if (tok.segment != Segment::kImage || !vocab::is_image(tok.id) || tok.forced) violation();
  }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

void PolicyConfig::validate() const {
  if (d < 1 || k < 1 || h < 1) throw std::invalid_argument("policy dimensions d, k, h must be >= 1");
  if (vocab_size != vocab::kSize) throw std::invalid_argument("vocab_size must match the domain vocabulary");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw std::invalid_argument("init_scale must be >= 0");
}

PolicyParams PolicyParams::zeros(const PolicyConfig& c) {
  c.validate();
  const auto d = static_cast<std::size_t>(c.d), h = static_cast<std::size_t>(c.h);
  const auto v = static_cast<std::size_t>(c.vocab_size), in = static_cast<std::size_t>(c.input_width());
  PolicyParams p;
  p.config = c;
  p.token_embeddings = Tensor("token_embeddings", v, d);
  p.prompt_pool_weights = Tensor("prompt_pool_weights", d, d);
  p.hidden_weights = Tensor("hidden_weights", in, h);
  p.hidden_bias = Tensor("hidden_bias", 1, h);
  p.output_weights = Tensor("output_weights", h, v);
  p.output_bias = Tensor("output_bias", 1, v);
  return p;
}

std::array<Tensor*, 6> PolicyParams::tensors() {
  return {&token_embeddings, &prompt_pool_weights, &hidden_weights, &hidden_bias, &output_weights, &output_bias};
}

std::array<const Tensor*, 6> PolicyParams::tensors() const {
  return {&token_embeddings, &prompt_pool_weights, &hidden_weights, &hidden_bias, &output_weights, &output_bias};
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->data.size();
  return n;
}

std::uint64_t PolicyParams::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor* t : tensors()) {
    for (double x : t->data) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

bool PolicyParams::all_finite() const {
  for (const Tensor* t : tensors()) {
    for (double x : t->data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void PolicyParams::set_zero() {
  for (Tensor* t : tensors()) std::fill(t->data.begin(), t->data.end(), 0.0);
}

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
  auto mine = tensors();
  auto theirs = other.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->data.size() != theirs[i]->data.size()) throw std::invalid_argument("shape mismatch");
    for (std::size_t j = 0; j < mine[i]->data.size(); ++j) mine[i]->data[j] += scale * theirs[i]->data[j];
  }
}

double PolicyParams::norm() const {
  double sq = 0.0;
  for (const Tensor* t : tensors()) {
    for (double x : t->data) sq += x * x;
  }
  return std::sqrt(sq);
}

PolicyParams init_params(const RngStream& rng, const PolicyConfig& config) {
  PolicyParams p = PolicyParams::zeros(config);
  RngDraws draws(rng);
  const double s = config.init_scale;
  for (Tensor* t : {&p.token_embeddings, &p.prompt_pool_weights, &p.hidden_weights, &p.output_weights}) {
    for (double& x : t->data) x = draws.uniform(-s, s);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

std::vector<double> prompt_feature(const PolicyParams& params, const Prompt& prompt) {
  const auto d = static_cast<std::size_t>(params.config.d);
  std::vector<double> mean(d, 0.0);
  for (TokenId id : prompt.tokens) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += params.token_embeddings.at(static_cast<std::size_t>(id), j);
  }
  if (!prompt.tokens.empty()) {
    for (double& m : mean) m /= static_cast<double>(prompt.tokens.size());
  }
  std::vector<double> feature(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) feature[j] += mean[i] * params.prompt_pool_weights.at(i, j);
  }
  return feature;
}

std::vector<TokenId> context_window(std::span<const TokenRecord> tokens, std::size_t position, int k) {
  std::vector<TokenId> ctx(static_cast<std::size_t>(k), vocab::kPad);
  const std::size_t take = std::min(position, static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < take; ++i) {
    ctx[static_cast<std::size_t>(k) - take + i] = tokens[position - take + i].id;
  }
  return ctx;
}

ForwardCache forward_cached(const PolicyParams& params, std::span<const double> feature,
                            std::span<const TokenId> context, Segment segment) {
  const PolicyConfig& c = params.config;
  if (context.size() != static_cast<std::size_t>(c.k)) throw std::invalid_argument("context length must equal k");
  const auto d = static_cast<std::size_t>(c.d), h = static_cast<std::size_t>(c.h);

  ForwardCache cache;
  cache.context.assign(context.begin(), context.end());
  cache.input.reserve(static_cast<std::size_t>(c.input_width()));
  for (TokenId id : context) {
    if (id < 0 || id >= c.vocab_size) throw std::out_of_range("context token outside vocabulary");
    const double* row = &params.token_embeddings.data[static_cast<std::size_t>(id) * d];
    cache.input.insert(cache.input.end(), row, row + d);
  }
  cache.input.insert(cache.input.end(), feature.begin(), feature.end());

  cache.hidden.assign(params.hidden_bias.data.begin(), params.hidden_bias.data.end());
  for (std::size_t i = 0; i < cache.input.size(); ++i) {
    const double x = cache.input[i];
    if (x == 0.0) continue;
    const double* w = &params.hidden_weights.data[i * h];
    for (std::size_t j = 0; j < h; ++j) cache.hidden[j] += x * w[j];
  }
  for (double& a : cache.hidden) a = std::tanh(a);

  const auto& active = vocab::active_set(segment);
  std::vector<double> logits(static_cast<std::size_t>(c.vocab_size), 0.0);
  for (TokenId v : active) {
    const auto col = static_cast<std::size_t>(v);
    double z = params.output_bias.data[col];
    for (std::size_t j = 0; j < h; ++j) z += cache.hidden[j] * params.output_weights.at(j, col);
    logits[col] = z;
  }
  cache.dist = masked_softmax(logits, active);
  return cache;
}

CategoricalDist forward(const PolicyParams& params, const Prompt& prompt, std::span<const TokenId> context,
                        Segment segment) {
  const auto feature = prompt_feature(params, prompt);
  return forward_cached(params, feature, context, segment).dist;
}

TrajectoryPass run_trajectory(const PolicyParams& params, const Trajectory& trajectory) {
  validate_structure(trajectory);
  TrajectoryPass pass;
  pass.feature = prompt_feature(params, trajectory.prompt);
  for (std::size_t pos : trajectory.scored_positions()) {
    const auto ctx = context_window(trajectory.tokens, pos, params.config.k);
    pass.steps.push_back(forward_cached(params, pass.feature, ctx, trajectory.tokens[pos].segment));
  }
  return pass;
}

std::vector<double> sequence_log_probs(const PolicyParams& params, const Trajectory& trajectory) {
  const TrajectoryPass pass = run_trajectory(params, trajectory);
  const auto positions = trajectory.scored_positions();
  std::vector<double> out;
  out.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.push_back(safe_log(pass.steps[i].dist.prob_of(trajectory.tokens[positions[i]].id)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void accumulate_backward(const PolicyParams& params, const Trajectory& trajectory, const TrajectoryPass& pass,
                         std::span<const TokenUpstream> upstream, PolicyParams& grad) {
  const PolicyConfig& c = params.config;
  const auto d = static_cast<std::size_t>(c.d), h = static_cast<std::size_t>(c.h);
  const auto k = static_cast<std::size_t>(c.k);
  const auto positions = trajectory.scored_positions();
  if (upstream.size() != positions.size() || pass.steps.size() != positions.size()) {
    throw std::invalid_argument("upstream gradients must align with scored tokens");
  }

  std::vector<double> d_feature(d, 0.0);
  std::vector<double> dz, d_hidden(h), d_pre(h);
  for (std::size_t t = 0; t < positions.size(); ++t) {
    const ForwardCache& step = pass.steps[t];
    const TokenUpstream& up = upstream[t];
    const CategoricalDist& dist = step.dist;
    const std::size_t n = dist.size();

    // Logit gradient over the active set.
    dz.assign(n, 0.0);
    if (up.d_log_prob != 0.0) {
      const int chosen = dist.index_of(trajectory.tokens[positions[t]].id);
      for (std::size_t j = 0; j < n; ++j) dz[j] -= up.d_log_prob * dist[j];
      dz[static_cast<std::size_t>(chosen)] += up.d_log_prob;
    }
    if (!up.d_probs.empty()) {
      if (up.d_probs.size() != n) throw std::invalid_argument("d_probs must match the active set");
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) weighted += dist[j] * up.d_probs[j];
      for (std::size_t j = 0; j < n; ++j) dz[j] += dist[j] * (up.d_probs[j] - weighted);
    }
    if (std::all_of(dz.begin(), dz.end(), [](double x) { return x == 0.0; })) continue;

    // Output layer.
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = static_cast<std::size_t>(dist.active_ids()[j]);
      grad.output_bias.data[col] += dz[j];
      for (std::size_t u = 0; u < h; ++u) {
        grad.output_weights.at(u, col) += step.hidden[u] * dz[j];
        d_hidden[u] += params.output_weights.at(u, col) * dz[j];
      }
    }

    // tanh and hidden layer.
    for (std::size_t u = 0; u < h; ++u) {
      d_pre[u] = d_hidden[u] * (1.0 - step.hidden[u] * step.hidden[u]);
      grad.hidden_bias.data[u] += d_pre[u];
    }
    for (std::size_t i = 0; i < step.input.size(); ++i) {
      const double x = step.input[i];
      const double* w = &params.hidden_weights.data[i * h];
      double* gw = &grad.hidden_weights.data[i * h];
      double dx = 0.0;
      for (std::size_t u = 0; u < h; ++u) {
        gw[u] += x * d_pre[u];
        dx += w[u] * d_pre[u];
      }
      if (i < k * d) {
        const auto token = static_cast<std::size_t>(step.context[i / d]);
        grad.token_embeddings.at(token, i % d) += dx;
      } else {
        d_feature[i - k * d] += dx;
      }
    }
  }

  // Prompt pooling: feature = mean(E[prompt]) * P.
  const auto& prompt = trajectory.prompt.tokens;
  if (prompt.empty()) return;
  std::vector<double> mean(d, 0.0);
  for (TokenId id : prompt) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += params.token_embeddings.at(static_cast<std::size_t>(id), j);
  }
  const double inv_n = 1.0 / static_cast<double>(prompt.size());
  for (double& m : mean) m *= inv_n;
  std::vector<double> d_mean(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      grad.prompt_pool_weights.at(i, j) += mean[i] * d_feature[j];
      d_mean[i] += params.prompt_pool_weights.at(i, j) * d_feature[j];
    }
  }
  for (TokenId id : prompt) {
    for (std::size_t j = 0; j < d; ++j) grad.token_embeddings.at(static_cast<std::size_t>(id), j) += d_mean[j] * inv_n;
  }
}

PolicyParams backward(const PolicyParams& params, const Trajectory& trajectory,
                      std::span<const TokenUpstream> upstream) {
  PolicyParams grad = PolicyParams::zeros(params.config);
  accumulate_backward(params, trajectory, run_trajectory(params, trajectory), upstream, grad);
  return grad;
}

}  // namespace irislab
