#include "ahakv/cache_manager.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ahakv/numerics.hpp"

namespace ahakv {

namespace {

bool evicts(const PolicyConfig& cfg) { return cfg.policy != PolicyKind::full; }

std::size_t sink_count(const PolicyConfig& cfg) {
  return std::min(cfg.sink_tokens, cfg.selected_budget);
}

ScoreVec prefill_scores(const QkvSet& qkv, const PolicyConfig& cfg) {
  const auto logits = causal_logits(qkv.q, qkv.k, ScaleMode::scaled_by_sqrt_d);
  const std::size_t r = std::min(cfg.recent_budget, qkv.n());
  switch (cfg.policy) {
    case PolicyKind::aha: {
      const auto raw = sg_recent_scores(logits, r, cfg.lambda_schedule);
      return refine_scores(raw, value_prior(qkv.v, cfg.pool_kernel));
    }
    case PolicyKind::recent_accum:
      return recent_accum_scores(attention_matrix(logits), r);
    case PolicyKind::full:
    case PolicyKind::sink:
    case PolicyKind::h2o:
      return h2o_scores(attention_matrix(logits));
  }
  throw std::logic_error("unhandled policy");
}

RetainedSet prefill_selection(std::span<const double> scores, std::size_t n,
                              const PolicyConfig& cfg) {
  switch (cfg.policy) {
    case PolicyKind::full: return select_retained(scores, n, n, 0);
    case PolicyKind::sink: {
      const std::size_t sinks = sink_count(cfg);
      return sink_retained(n, sinks, cfg.total_budget - sinks);
    }
    default: return select_retained(scores, n, cfg);
  }
}

}  // namespace

void HeadCacheState::check_invariants(const PolicyConfig& cfg) const {
  if (keys.rows() != indices.size() || values.rows() != indices.size() ||
      scores.size() != indices.size())
    throw std::logic_error("HeadCacheState: keys/values/indices/scores misaligned");
  if (!std::is_sorted(indices.begin(), indices.end()) ||
      std::adjacent_find(indices.begin(), indices.end()) != indices.end())
    throw std::logic_error("HeadCacheState: indices not strictly increasing");
  if (evicts(cfg) && indices.size() > cfg.total_budget)
    throw std::logic_error("HeadCacheState: " + std::to_string(indices.size()) +
                           " retained exceeds budget " + std::to_string(cfg.total_budget));
  const std::size_t window = std::min(cfg.recent_budget, processed);
  for (std::size_t t = processed - window; t < processed; ++t) {
    if (!std::binary_search(indices.begin(), indices.end(), t))
      throw std::logic_error("HeadCacheState: recent token " + std::to_string(t) + " missing");
  }
  for (double f : scores) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw std::logic_error("HeadCacheState: bad score");
  }
}

HeadCacheState prefill_head(const QkvSet& qkv, const PolicyConfig& cfg) {
  cfg.validate();
  qkv.validate();
  if (cfg.lambda_schedule.head_dim != qkv.d() && cfg.policy == PolicyKind::aha)
    throw std::invalid_argument("prefill: lambda schedule head_dim " +
                                std::to_string(cfg.lambda_schedule.head_dim) +
                                " does not match d = " + std::to_string(qkv.d()));
  const std::size_t n = qkv.n();
  const auto scores = prefill_scores(qkv, cfg);
  HeadCacheState state;
  state.indices = prefill_selection(scores, n, cfg);
  state.keys = qkv.k.gather_rows(state.indices);
  state.values = qkv.v.gather_rows(state.indices);
  state.scores.reserve(state.indices.size());
  for (std::size_t j : state.indices) state.scores.push_back(scores[j]);
  state.processed = n;
  return state;
}

std::vector<HeadCacheState> prefill(std::span<const QkvSet> heads, const PolicyConfig& cfg) {
  std::vector<HeadCacheState> out;
  out.reserve(heads.size());
  for (const auto& qkv : heads) out.push_back(prefill_head(qkv, cfg));
  return out;
}

StepOutput generation_step(HeadCacheState& state, std::span<const double> q,
                           std::span<const double> k, std::span<const double> v,
                           const PolicyConfig& cfg) {
  const std::size_t d = state.keys.cols();
  if (state.indices.empty()) throw std::invalid_argument("generation_step: state not prefilled");
  if (q.size() != d || k.size() != d || v.size() != d)
    throw std::invalid_argument("generation_step: expected vectors of width " + std::to_string(d));

  state.keys.append_row(k);
  state.values.append_row(v);
  state.indices.push_back(state.processed);
  state.scores.push_back(0.0);
  ++state.processed;
  ++state.step;

  StepOutput result;
  result.output = attend_rows(q, state.keys, state.values);

  const double divisor = std::sqrt(static_cast<double>(d));
  std::vector<double> logits(state.size());
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = dot(q, state.keys.row(j)) / divisor;
  const auto increment = cfg.policy == PolicyKind::aha
                             ? sg_softmax(logits, lambda_for(cfg.lambda_schedule, state.processed))
                             : softmax(logits);
  for (std::size_t j = 0; j < increment.size(); ++j) state.scores[j] += increment[j];

  if (!evicts(cfg) || state.size() <= cfg.total_budget) return result;

  std::size_t victim = 0;
  if (cfg.policy == PolicyKind::sink) {
    victim = sink_count(cfg);
  } else {
    // Minimum F outside the recent window; on ties the later token goes, so
    // the survivors are exactly the top-Bs with lower indices winning ties.
    const std::size_t candidates = state.size() - std::min(cfg.recent_budget, state.size());
    if (candidates == 0) throw std::logic_error("generation_step: nothing evictable");
    for (std::size_t j = 1; j < candidates; ++j) {
      if (state.scores[j] <= state.scores[victim]) victim = j;
    }
  }
  result.evicted = state.indices[victim];
  state.keys.erase_row(victim);
  state.values.erase_row(victim);
  state.indices.erase(state.indices.begin() + static_cast<std::ptrdiff_t>(victim));
  state.scores.erase(state.scores.begin() + static_cast<std::ptrdiff_t>(victim));
  return result;
}

void GenerationTrace::write(std::ostream& os) const {
  for (const auto& rec : records) {
    for (std::size_t h = 0; h < rec.retained.size(); ++h) {
      os << rec.step << '\t' << rec.token << '\t' << h << '\t';
      const auto& idx = rec.retained[h];
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) os << ',';
        os << idx[i];
      }
      os << '\n';
    }
  }
}

std::string GenerationTrace::serialize() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

PolicyKvCache::PolicyKvCache(std::size_t layers, std::size_t heads, PolicyConfig cfg)
    : cfg_(std::move(cfg)),
      heads_(heads),
      states_(layers * heads),
      pending_evictions_(layers * heads) {
  cfg_.validate();
  trace_.layers = layers;
  trace_.heads = heads;
}

void PolicyKvCache::prefill(std::size_t layer, std::size_t head, const QkvSet& qkv) {
  states_.at(layer * heads_ + head) = prefill_head(qkv, cfg_);
}

std::vector<double> PolicyKvCache::attend(std::size_t layer, std::size_t head,
                                          std::span<const double> q, std::span<const double> k,
                                          std::span<const double> v) {
  const std::size_t id = layer * heads_ + head;
  auto step = generation_step(states_.at(id), q, k, v, cfg_);
  pending_evictions_[id] = step.evicted;
  return std::move(step.output);
}

void PolicyKvCache::on_token(std::size_t step, TokenId token) {
  TraceRecord rec;
  rec.step = step;
  rec.token = token;
  rec.retained.reserve(states_.size());
  for (const auto& s : states_) rec.retained.push_back(s.indices);
  rec.evicted = pending_evictions_;
  std::fill(pending_evictions_.begin(), pending_evictions_.end(), std::nullopt);
  trace_.records.push_back(std::move(rec));
}

EndToEndResult run_policy_end_to_end(const ToyModel& model, std::span<const TokenId> prompt,
                                     std::size_t steps, const PolicyConfig& cfg) {
  const auto& mc = model.config();
  PolicyKvCache cache(mc.layers, mc.heads, cfg);
  EndToEndResult result;
  result.tokens = greedy_decode(model, prompt, steps, cache);
  result.trace = cache.take_trace();
  return result;
}

}  // namespace ahakv
