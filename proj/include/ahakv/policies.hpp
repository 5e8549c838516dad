#pragma once

// Eviction scoring and retained-set selection.
//
// Score vectors are plain std::vector<double> indexed by token position; all
// entries are finite and nonnegative. Retained sets are strictly increasing
// token indices.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ahakv/attention_sim.hpp"
#include "ahakv/matrix.hpp"
#include "ahakv/numerics.hpp"

namespace ahakv {

using ScoreVec = std::vector<double>;
using RetainedSet = std::vector<std::size_t>;

enum class PolicyKind { full, sink, h2o, recent_accum, aha };

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind policy_from_string(std::string_view name);

struct PolicyConfig {
  std::size_t total_budget = 1;     // B
  std::size_t recent_budget = 1;    // Br, always kept
  std::size_t selected_budget = 0;  // Bs, kept by score
  LambdaSchedule lambda_schedule;
  std::size_t pool_kernel = 7;
  PolicyKind policy = PolicyKind::aha;
  std::size_t sink_tokens = 4;  // sink policy only

  /// B = total, Br = recent, Bs = total - recent, lambda schedule keyed to
  /// B with the default 1/sqrt(d) floor.
  static PolicyConfig make(PolicyKind kind, std::size_t total, std::size_t recent,
                           std::size_t head_dim);

  /// Throws std::invalid_argument unless B == Br + Bs, Br >= 1, the pool
  /// kernel is odd and the schedule is valid.
  void validate() const;
};

/// Column sums of a causal attention matrix over every row.
ScoreVec h2o_scores(const LowerTriangular& attn);

/// Column sums over the last r rows only, 1 <= r <= n.
ScoreVec recent_accum_scores(const LowerTriangular& attn, std::size_t r);

/// Column sums over the last r rows of the step-gain softmax, each row i
/// (0-based) scaled by lambda_for(schedule, i + 1).
ScoreVec sg_recent_scores(const CausalLogits& logits, std::size_t r, const LambdaSchedule& schedule);

struct ValuePrior {
  std::vector<double> gamma_bar;  // in [0, 1], max 1
  std::size_t kernel = 1;
};

/// Squared value-row norms, mean-filtered and normalized by their maximum.
/// All-zero values give an all-ones prior.
ValuePrior value_prior(const Matrix& values, std::size_t kernel);

/// Elementwise product of scores and prior.
ScoreVec refine_scores(std::span<const double> scores, const ValuePrior& prior);

/// Keeps the last min(recent, n) indices plus the `selected` highest-scoring
/// of the rest (lower index wins ties). n <= recent + selected keeps all.
RetainedSet select_retained(std::span<const double> scores, std::size_t n, std::size_t recent,
                            std::size_t selected);
RetainedSet select_retained(std::span<const double> scores, std::size_t n,
                            const PolicyConfig& cfg);

/// First min(n_init, n) indices together with the last min(recent, n).
RetainedSet sink_retained(std::size_t n, std::size_t n_init, std::size_t recent);

/// Selection driven by the last attention row alone.
RetainedSet last_query_retained(const LowerTriangular& attn, const PolicyConfig& cfg);

}  // namespace ahakv
