#pragma once

// Monte Carlo checks of the statistical claims behind the eviction policy,
// plus the positional-bias and sparsity metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ahakv/attention_sim.hpp"
#include "ahakv/numerics.hpp"
#include "ahakv/policies.hpp"

namespace ahakv {

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const noexcept;
  /// sqrt(variance / count).
  double std_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

enum class PassKind {
  none,              // reported without judgment
  within_sigmas,     // |estimate - target| <= tol * se
  below_by_sigmas,   // estimate - target <= -tol * se
  relative,          // |estimate - target| <= tol * |target|
};

struct PassRule {
  PassKind kind = PassKind::none;
  double tolerance = 0.0;

  static PassRule none() { return {}; }
  static PassRule within_sigmas(double k) { return {PassKind::within_sigmas, k}; }
  static PassRule below_by_sigmas(double k) { return {PassKind::below_by_sigmas, k}; }
  static PassRule relative(double tol) { return {PassKind::relative, tol}; }

  std::string describe() const;
};

bool judge(const PassRule& rule, double estimate, double std_error, double target);

struct McReport {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  double target = 0.0;
  PassRule rule;
  bool pass = false;

  static McReport make(std::string name, double estimate, double std_error, std::size_t trials,
                       double target, PassRule rule);
  static McReport from_stats(std::string name, const RunningStats& stats, double target,
                             PassRule rule);
  bool judged() const noexcept { return rule.kind != PassKind::none; }
};

/// Synthetic-instance stream for trial t under `seed`.
SynthConfig trial_config(std::size_t n, std::size_t d, std::uint64_t seed, std::uint64_t trial);

struct ScoreGapReport {
  std::size_t mid_lo = 0;        // gap positions j in [mid_lo, mid_hi]
  std::size_t mid_hi = 0;
  McReport gap_mid;              // mean(S_{j+1} - S_j), must be negative
  McReport neg_diag_mid;         // -mean(a_{j,j}), reported
  McReport agreement_mid;        // paired difference of the two, must be ~0
  McReport gap_full;             // same over all j in [0, n-2], reported
  McReport neg_diag_full;
  McReport agreement_full;
};

/// Score-gap statistics of the accumulated score over Gaussian Q/K.
ScoreGapReport mc_score_gap(std::size_t n, std::size_t d, std::size_t trials, std::uint64_t seed);

struct SlopeEstimate {
  double slope = 0.0;
  double std_error = 0.0;
};

/// Ordinary least squares slope of y against its index, with the classical
/// residual-based standard error (0 for fewer than three points).
SlopeEstimate least_squares_slope(std::span<const double> y);

struct PositionProfile {
  std::vector<double> mean;       // per-position mean score
  std::vector<double> std_error;  // per-position standard error
  McReport slope;                 // slope of the means; SE from per-trial slopes
};

struct DebiasReport {
  std::size_t positions = 0;  // positions 0 .. positions-1 enter the fits
  PositionProfile h2o;
  PositionProfile recent;
};

/// Per-position mean of the full-column accumulated score versus the
/// recent-row accumulation over Gaussian Q/K. The last r positions are
/// excluded from both fits. The h2o slope must be below zero by 5 SE and
/// the recent slope within 3 SE of zero.
DebiasReport mc_position_bias(std::size_t n, std::size_t d, std::size_t r, std::size_t trials,
                              std::uint64_t seed);

enum class EntropyTarget { empirical_variance, nominal_variance };

struct EntropyReport {
  std::size_t i = 0;
  double lambda = 0.0;
  double logit_variance = 0.0;  // empirical, pre-lambda
  double target_nominal = 0.0;
  double target_empirical = 0.0;
  bool in_regime = false;       // target >= ln(i) / 2
  McReport report;
};

/// Mean entropy of sg_softmax over rows of i Gaussian logits q . K_j (scaled
/// by 1/sqrt(d) or not). The target is ln i - lambda^2 sigma^2 / 2 with
/// sigma^2 either the nominal pre-lambda variance (1 or d) or the empirical
/// one. Judged at `rel_tol` only inside the regime.
EntropyReport mc_entropy(std::size_t i, std::size_t d, double lambda, std::size_t trials,
                         std::uint64_t seed, ScaleMode mode, double rel_tol = 0.05,
                         EntropyTarget target = EntropyTarget::empirical_variance);

/// E[e^x] and E[x e^x] for x ~ N(mu, sigma2), judged at 3 SE against the
/// closed forms.
std::pair<McReport, McReport> mc_lognormal(GaussianParams p, std::size_t trials,
                                           std::uint64_t seed);

struct BiasMetrics {
  double mean_retained_index_ratio = 0.0;  // in [0, 1]
  double ks_to_uniform = 0.0;              // in [0, 1]
  std::optional<SlopeEstimate> slope_of_position_means;
};

/// Metrics of retained indices over the domain [lo, hi]. Index j is placed
/// at (j - lo + 0.5) / (hi - lo + 1) for the KS distance to the continuous
/// uniform, so the full domain scores 1 / (2 (hi - lo + 1)).
BiasMetrics bias_metrics(std::span<const std::size_t> retained, std::size_t lo, std::size_t hi);
/// Domain [0, n-1]; a nonempty `position_means` also gets a slope fit.
BiasMetrics bias_metrics(std::span<const std::size_t> retained, std::size_t n,
                         std::span<const double> position_means = {});

struct RetentionCurves {
  std::vector<double> thresholds;
  std::vector<double> plain;
  std::vector<double> refined;

  /// Fraction of thresholds where refined <= plain.
  double fraction_refined_at_or_below() const;
};

/// For each threshold, the fraction of tokens whose max-normalized score is
/// at least the threshold.
RetentionCurves retention_ratio_curve(std::span<const double> scores,
                                      std::span<const double> refined,
                                      std::span<const double> thresholds);

/// `count` evenly spaced thresholds from 0 to tau_max inclusive.
std::vector<double> threshold_grid(std::size_t count, double tau_max);

/// Which raw score the value prior refines in the sparsity comparison.
enum class SparsityBase { aha, h2o };
std::string_view to_string(SparsityBase base) noexcept;
SparsityBase sparsity_base_from_string(std::string_view name);

/// One Gaussian instance: raw scores vs value-prior refined scores.
RetentionCurves sparsity_instance(std::size_t n, std::size_t d, const PolicyConfig& cfg,
                                  SparsityBase base, std::uint64_t seed,
                                  std::span<const double> thresholds);

struct RetentionSample {
  RetainedSet aha;
  RetainedSet h2o;
  BiasMetrics aha_all;       // over [0, n-1]
  BiasMetrics h2o_all;
  BiasMetrics aha_selected;  // recent window removed, over [0, n-Br-1]
  BiasMetrics h2o_selected;
};

/// Prefill selection of the aha and h2o policies on one Gaussian instance.
RetentionSample positional_retention(std::size_t n, std::size_t d, std::size_t total_budget,
                                     std::size_t recent_budget, std::uint64_t seed);

}  // namespace ahakv
