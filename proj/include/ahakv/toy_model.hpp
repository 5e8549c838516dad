#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ahakv/attention_sim.hpp"
#include "ahakv/matrix.hpp"

namespace ahakv {

using TokenId = std::int32_t;

struct ToyModelConfig {
  std::size_t vocab = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t head_dim = 8;
  std::size_t mlp_mult = 4;
  std::uint64_t seed = 0;

  std::size_t model_dim() const noexcept { return heads * head_dim; }
  void validate() const;
};

/// Scaled dot-product attention of one query over the first `count` rows of
/// `keys`/`values` (all rows when count is 0). Logits are divided by
/// sqrt(d) and normalized with the standard softmax. Every attention output
/// in the library goes through here, which is what makes cached and
/// uncached decoding bit-identical.
std::vector<double> attend_rows(std::span<const double> query, const Matrix& keys,
                                const Matrix& values, std::size_t count = 0);

/// Where a decoder reads and writes its key/value history.
class KvCacheHook {
 public:
  virtual ~KvCacheHook() = default;

  /// Prompt Q/K/V of one head, after projection. Called once per head before
  /// any `attend` on that head.
  virtual void prefill(std::size_t layer, std::size_t head, const QkvSet& qkv) = 0;

  /// Inserts (k, v) for the new token and returns the head's attention output
  /// for query q over whatever the cache retains.
  virtual std::vector<double> attend(std::size_t layer, std::size_t head, std::span<const double> q,
                                     std::span<const double> k, std::span<const double> v) = 0;

  /// Called once per emitted token, after the cache state that produced it.
  virtual void on_token(std::size_t /*step*/, TokenId /*token*/) {}
};

/// Keeps every key and value; the no-eviction cache.
class FullKvCache final : public KvCacheHook {
 public:
  FullKvCache(std::size_t layers, std::size_t heads);

  void prefill(std::size_t layer, std::size_t head, const QkvSet& qkv) override;
  std::vector<double> attend(std::size_t layer, std::size_t head, std::span<const double> q,
                             std::span<const double> k, std::span<const double> v) override;

 private:
  std::size_t heads_;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
};

/// Untrained decoder-only transformer: token embedding plus a sinusoidal
/// position signal, pre-norm multi-head causal attention, a two-layer GELU
/// MLP, and an output projection tied to the embedding. Immutable after
/// construction.
class ToyModel {
 public:
  explicit ToyModel(const ToyModelConfig& cfg);

  const ToyModelConfig& config() const noexcept { return cfg_; }

  /// Next-token logits after `tokens`, computed from scratch.
  std::vector<double> forward(std::span<const TokenId> tokens) const;

  /// Runs the prompt with full causal attention, handing each head's Q/K/V
  /// to `cache`, and returns next-token logits.
  std::vector<double> prefill(std::span<const TokenId> prompt, KvCacheHook& cache) const;

  /// Processes `token` at absolute `position` using `cache` for attention.
  std::vector<double> decode_step(TokenId token, std::size_t position, KvCacheHook& cache) const;

 private:
  struct Layer {
    Matrix wq, wk, wv, wo, w1, w2;
  };

  void check_token(TokenId token) const;
  std::vector<double> embed(TokenId token, std::size_t position) const;
  std::vector<double> mlp_residual(const Layer& layer, std::vector<double> x) const;
  std::vector<double> output_logits(std::span<const double> x) const;
  std::vector<double> run_prompt(std::span<const TokenId> tokens, KvCacheHook* cache) const;

  ToyModelConfig cfg_;
  Matrix embedding_;  // vocab x model_dim
  std::vector<Layer> layers_;
};

ToyModel build_toy_model(const ToyModelConfig& cfg);

/// Lowest token id among the maxima.
TokenId argmax_token(std::span<const double> logits);

/// Greedy decoding with all K/V traffic routed through `cache`.
/// Returns `steps` new tokens.
std::vector<TokenId> greedy_decode(const ToyModel& model, std::span<const TokenId> prompt,
                                   std::size_t steps, KvCacheHook& cache);

/// Greedy decoding that recomputes the whole sequence each step, no cache.
std::vector<TokenId> reference_decode(const ToyModel& model, std::span<const TokenId> prompt,
                                      std::size_t steps);

/// Uniform random prompt over the model vocabulary.
std::vector<TokenId> random_prompt(std::size_t length, std::size_t vocab, std::uint64_t seed);

}  // namespace ahakv
