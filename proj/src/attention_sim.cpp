#include "ahakv/attention_sim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ahakv/numerics.hpp"
#include "ahakv/rng.hpp"

namespace ahakv {

std::string_view to_string(ScaleMode mode) noexcept {
  return mode == ScaleMode::scaled_by_sqrt_d ? "scaled" : "unscaled";
}

ScaleMode scale_mode_from_string(std::string_view name) {
  if (name == "scaled" || name == "scaled_by_sqrt_d") return ScaleMode::scaled_by_sqrt_d;
  if (name == "unscaled") return ScaleMode::unscaled;
  throw std::invalid_argument("unknown scale mode '" + std::string(name) + "'");
}

double logit_scale(ScaleMode mode, std::size_t head_dim) {
  if (head_dim == 0) throw std::invalid_argument("logit_scale: head_dim must be >= 1");
  return mode == ScaleMode::scaled_by_sqrt_d ? 1.0 / std::sqrt(static_cast<double>(head_dim)) : 1.0;
}

void QkvSet::validate() const {
  if (q.rows() == 0 || q.cols() == 0) throw std::invalid_argument("QkvSet: n and d must be >= 1");
  if (k.rows() != q.rows() || k.cols() != q.cols() || v.rows() != q.rows() || v.cols() != q.cols())
    throw std::invalid_argument("QkvSet: q, k, v must share shape n x d");
}

QkvSet gaussian_qkv(const SynthConfig& cfg) {
  if (cfg.n == 0 || cfg.d == 0) throw std::invalid_argument("gaussian_qkv: n and d must be >= 1");
  auto fill = [&](std::uint64_t stream) {
    CounterRng rng(cfg.seed, stream);
    Matrix m(cfg.n, cfg.d);
    for (double& x : m.data()) x = rng.normal();
    return m;
  };
  return {fill(0), fill(1), fill(2)};
}

CausalLogits causal_logits(const Matrix& q, const Matrix& k, ScaleMode mode) {
  if (q.rows() != k.rows() || q.cols() != k.cols())
    throw std::invalid_argument("causal_logits: q is " + std::to_string(q.rows()) + "x" +
                                std::to_string(q.cols()) + " but k is " + std::to_string(k.rows()) +
                                "x" + std::to_string(k.cols()));
  if (q.rows() == 0 || q.cols() == 0) throw std::invalid_argument("causal_logits: empty input");
  // Divide rather than multiply so scaled entries are exactly unscaled / sqrt(d).
  const double divisor =
      mode == ScaleMode::scaled_by_sqrt_d ? std::sqrt(static_cast<double>(q.cols())) : 1.0;
  CausalLogits out{LowerTriangular(q.rows()), 1.0 / divisor};
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto row = out.w.row(i);
    for (std::size_t j = 0; j <= i; ++j) row[j] = dot(q.row(i), k.row(j)) / divisor;
  }
  return out;
}

LowerTriangular attention_matrix(const CausalLogits& logits) {
  LowerTriangular out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto probs = softmax(logits.row(i));
    std::copy(probs.begin(), probs.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace ahakv
