#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "ahakv/matrix.hpp"

namespace ahakv {

enum class ScaleMode { scaled_by_sqrt_d, unscaled };

std::string_view to_string(ScaleMode mode) noexcept;
ScaleMode scale_mode_from_string(std::string_view name);
/// 1/sqrt(d) for scaled_by_sqrt_d, 1 for unscaled.
double logit_scale(ScaleMode mode, std::size_t head_dim);

/// Query, key and value rows of one attention head, all n x d.
struct QkvSet {
  Matrix q;
  Matrix k;
  Matrix v;

  std::size_t n() const noexcept { return q.rows(); }
  std::size_t d() const noexcept { return q.cols(); }
  void validate() const;
};

struct SynthConfig {
  std::size_t n = 1;
  std::size_t d = 1;
  std::uint64_t seed = 0;
  ScaleMode scale_mode = ScaleMode::scaled_by_sqrt_d;
};

/// i.i.d. standard normal Q, K, V. Each matrix draws from its own counter
/// stream of `seed`, so identical configs give bit-identical sets.
QkvSet gaussian_qkv(const SynthConfig& cfg);

/// Pre-softmax causal scores w[i][j] = scale * Q_i . K_j for j <= i.
struct CausalLogits {
  LowerTriangular w;
  double scale = 1.0;

  std::size_t size() const noexcept { return w.size(); }
  std::span<const double> row(std::size_t i) const { return w.row(i); }
};

CausalLogits causal_logits(const Matrix& q, const Matrix& k, ScaleMode mode);

/// Row-wise softmax of the causal logits; row i has i + 1 entries.
LowerTriangular attention_matrix(const CausalLogits& logits);

}  // namespace ahakv
