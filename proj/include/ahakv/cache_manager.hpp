#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ahakv/attention_sim.hpp"
#include "ahakv/matrix.hpp"
#include "ahakv/policies.hpp"
#include "ahakv/toy_model.hpp"

namespace ahakv {

/// Per-head cache: retained K/V rows, their original token indices and the
/// running eviction score F, all aligned row for row.
struct HeadCacheState {
  Matrix keys;
  Matrix values;
  RetainedSet indices;
  std::vector<double> scores;
  std::size_t step = 0;       // generation steps applied
  std::size_t processed = 0;  // tokens seen so far, prompt included

  std::size_t size() const noexcept { return indices.size(); }

  /// Throws std::logic_error if alignment, budget or recency is violated.
  void check_invariants(const PolicyConfig& cfg) const;
};

/// Scores the prompt of one head under cfg.policy and keeps the winners.
HeadCacheState prefill_head(const QkvSet& qkv, const PolicyConfig& cfg);

std::vector<HeadCacheState> prefill(std::span<const QkvSet> heads, const PolicyConfig& cfg);

struct StepOutput {
  std::vector<double> output;           // attention output for the new query
  std::optional<std::size_t> evicted;  // original index removed this step
};

/// Appends (k, v), attends q over the retained rows with the standard
/// softmax, adds this step's score row to F, and evicts at most one token to
/// get back within budget.
StepOutput generation_step(HeadCacheState& state, std::span<const double> q,
                           std::span<const double> k, std::span<const double> v,
                           const PolicyConfig& cfg);

struct TraceRecord {
  std::size_t step = 0;
  TokenId token = 0;
  std::vector<RetainedSet> retained;                 // one per (layer, head)
  std::vector<std::optional<std::size_t>> evicted;  // one per (layer, head)
};

/// Step-by-step retention history of a decode. Head ids are
/// layer * heads + head.
struct GenerationTrace {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::vector<TraceRecord> records;

  /// One line per (step, head): step, token, head id, comma-joined retained
  /// indices; tab separated, LF terminated.
  void write(std::ostream& os) const;
  std::string serialize() const;
};

/// KvCacheHook that runs one HeadCacheState per (layer, head) under a policy
/// and records a GenerationTrace.
class PolicyKvCache final : public KvCacheHook {
 public:
  PolicyKvCache(std::size_t layers, std::size_t heads, PolicyConfig cfg);

  void prefill(std::size_t layer, std::size_t head, const QkvSet& qkv) override;
  std::vector<double> attend(std::size_t layer, std::size_t head, std::span<const double> q,
                             std::span<const double> k, std::span<const double> v) override;
  void on_token(std::size_t step, TokenId token) override;

  const GenerationTrace& trace() const noexcept { return trace_; }
  GenerationTrace take_trace() { return std::move(trace_); }
  const std::vector<HeadCacheState>& states() const noexcept { return states_; }
  const PolicyConfig& config() const noexcept { return cfg_; }

 private:
  PolicyConfig cfg_;
  std::size_t heads_;
  std::vector<HeadCacheState> states_;
  std::vector<std::optional<std::size_t>> pending_evictions_;
  GenerationTrace trace_;
};

struct EndToEndResult {
  std::vector<TokenId> tokens;
  GenerationTrace trace;
};

EndToEndResult run_policy_end_to_end(const ToyModel& model, std::span<const TokenId> prompt,
                                     std::size_t steps, const PolicyConfig& cfg);

}  // namespace ahakv
