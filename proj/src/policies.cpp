#include "ahakv/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ahakv {

std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::full: return "full";
    case PolicyKind::sink: return "sink";
    case PolicyKind::h2o: return "h2o";
    case PolicyKind::recent_accum: return "recent_accum";
    case PolicyKind::aha: return "aha";
  }
  return "?";
}

PolicyKind policy_from_string(std::string_view name) {
  for (auto kind : {PolicyKind::full, PolicyKind::sink, PolicyKind::h2o, PolicyKind::recent_accum,
                    PolicyKind::aha}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

PolicyConfig PolicyConfig::make(PolicyKind kind, std::size_t total, std::size_t recent,
                                std::size_t head_dim) {
  if (recent > total) throw std::invalid_argument("PolicyConfig: recent budget exceeds total");
  PolicyConfig cfg;
  cfg.total_budget = total;
  cfg.recent_budget = recent;
  cfg.selected_budget = total - recent;
  cfg.lambda_schedule = LambdaSchedule::with_default_floor(std::max<std::size_t>(total, 1), head_dim);
  cfg.policy = kind;
  return cfg;
}

void PolicyConfig::validate() const {
  if (recent_budget == 0) throw std::invalid_argument("PolicyConfig: recent budget must be >= 1");
  if (total_budget != recent_budget + selected_budget)
    throw std::invalid_argument("PolicyConfig: total budget " + std::to_string(total_budget) +
                                " != recent " + std::to_string(recent_budget) + " + selected " +
                                std::to_string(selected_budget));
  if (pool_kernel == 0 || pool_kernel % 2 == 0)
    throw std::invalid_argument("PolicyConfig: pool kernel must be odd and >= 1");
  lambda_schedule.validate();
}

ScoreVec h2o_scores(const LowerTriangular& attn) {
  if (attn.size() == 0) throw std::invalid_argument("h2o_scores: empty attention matrix");
  return recent_accum_scores(attn, attn.size());
}

ScoreVec recent_accum_scores(const LowerTriangular& attn, std::size_t r) {
  const std::size_t n = attn.size();
  if (r == 0 || r > n)
    throw std::invalid_argument("recent_accum_scores: r = " + std::to_string(r) +
                                " outside [1, " + std::to_string(n) + "]");
  ScoreVec scores(n, 0.0);
  for (std::size_t i = n - r; i < n; ++i) {
    auto row = attn.row(i);
    for (std::size_t j = 0; j <= i; ++j) scores[j] += row[j];
  }
  return scores;
}

ScoreVec sg_recent_scores(const CausalLogits& logits, std::size_t r, const LambdaSchedule& schedule) {
  const std::size_t n = logits.size();
  if (r == 0 || r > n)
    throw std::invalid_argument("sg_recent_scores: r = " + std::to_string(r) + " outside [1, " +
                                std::to_string(n) + "]");
  ScoreVec scores(n, 0.0);
  for (std::size_t i = n - r; i < n; ++i) {
    const auto probs = sg_softmax(logits.row(i), lambda_for(schedule, i + 1));
    for (std::size_t j = 0; j <= i; ++j) scores[j] += probs[j];
  }
  return scores;
}

ValuePrior value_prior(const Matrix& values, std::size_t kernel) {
  if (values.rows() == 0) throw std::invalid_argument("value_prior: no value rows");
  std::vector<double> norms(values.rows());
  for (std::size_t i = 0; i < values.rows(); ++i) norms[i] = dot(values.row(i), values.row(i));
  auto gamma = avgpool_1d(norms, kernel);
  const double peak = *std::max_element(gamma.begin(), gamma.end());
  if (peak <= 0.0) {
    std::fill(gamma.begin(), gamma.end(), 1.0);
  } else {
    for (double& g : gamma) g /= peak;
  }
  return {std::move(gamma), kernel};
}

ScoreVec refine_scores(std::span<const double> scores, const ValuePrior& prior) {
  if (scores.size() != prior.gamma_bar.size())
    throw std::invalid_argument("refine_scores: " + std::to_string(scores.size()) +
                                " scores but " + std::to_string(prior.gamma_bar.size()) +
                                " prior weights");
  ScoreVec out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = prior.gamma_bar[i] * scores[i];
  return out;
}

RetainedSet select_retained(std::span<const double> scores, std::size_t n, std::size_t recent,
                            std::size_t selected) {
  if (n == 0) throw std::invalid_argument("select_retained: n must be >= 1");
  if (scores.size() != n)
    throw std::invalid_argument("select_retained: expected " + std::to_string(n) + " scores, got " +
                                std::to_string(scores.size()));
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("select_retained: non-finite score");
  }
  RetainedSet all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= recent + selected) return all;

  const std::size_t window_start = n - std::min(recent, n);
  RetainedSet candidates(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(window_start));
  const std::size_t take = std::min(selected, candidates.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  RetainedSet kept(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(kept.begin(), kept.end());
  for (std::size_t j = window_start; j < n; ++j) kept.push_back(j);
  return kept;
}

RetainedSet select_retained(std::span<const double> scores, std::size_t n,
                            const PolicyConfig& cfg) {
  cfg.validate();
  return select_retained(scores, n, cfg.recent_budget, cfg.selected_budget);
}

RetainedSet sink_retained(std::size_t n, std::size_t n_init, std::size_t recent) {
  if (n == 0) throw std::invalid_argument("sink_retained: n must be >= 1");
  RetainedSet out;
  const std::size_t head = std::min(n_init, n);
  const std::size_t tail_start = n - std::min(recent, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j < head || j >= tail_start) out.push_back(j);
  }
  return out;
}

RetainedSet last_query_retained(const LowerTriangular& attn, const PolicyConfig& cfg) {
  if (attn.size() == 0) throw std::invalid_argument("last_query_retained: empty attention matrix");
  return select_retained(attn.row(attn.size() - 1), attn.size(), cfg);
}

}  // namespace ahakv
