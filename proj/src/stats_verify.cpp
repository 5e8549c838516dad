#include "ahakv/stats_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ahakv/cache_manager.hpp"
#include "ahakv/rng.hpp"

namespace ahakv {

void RunningStats::add(double x) noexcept {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::variance() const noexcept {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double RunningStats::std_error() const noexcept {
  return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

std::string PassRule::describe() const {
  std::ostringstream os;
  switch (kind) {
    case PassKind::none: return "reported";
    case PassKind::within_sigmas: os << "|est-target|<=" << tolerance << "se"; break;
    case PassKind::below_by_sigmas: os << "est-target<=-" << tolerance << "se"; break;
    case PassKind::relative: os << "|est-target|<=" << tolerance << "*|target|"; break;
  }
  return os.str();
}

bool judge(const PassRule& rule, double estimate, double std_error, double target) {
  switch (rule.kind) {
    case PassKind::none: return true;
    case PassKind::within_sigmas: return std::abs(estimate - target) <= rule.tolerance * std_error;
    case PassKind::below_by_sigmas: return estimate - target <= -rule.tolerance * std_error;
    case PassKind::relative: return std::abs(estimate - target) <= rule.tolerance * std::abs(target);
  }
  return false;
}

McReport McReport::make(std::string name, double estimate, double std_error, std::size_t trials,
                        double target, PassRule rule) {
  McReport r{std::move(name), estimate, std_error, trials, target, rule, false};
  r.pass = judge(rule, estimate, std_error, target);
  return r;
}

McReport McReport::from_stats(std::string name, const RunningStats& stats, double target,
                              PassRule rule) {
  return make(std::move(name), stats.mean(), stats.std_error(), stats.count(), target, rule);
}

SynthConfig trial_config(std::size_t n, std::size_t d, std::uint64_t seed, std::uint64_t trial) {
  return {n, d, derive_seed(seed, trial), ScaleMode::scaled_by_sqrt_d};
}

ScoreGapReport mc_score_gap(std::size_t n, std::size_t d, std::size_t trials, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("mc_score_gap: n must be >= 2");
  if (trials < 2) throw std::invalid_argument("mc_score_gap: trials must be >= 2");
  ScoreGapReport out;
  out.mid_lo = std::min(n / 4, n - 2);
  out.mid_hi = std::clamp<std::size_t>((3 * n) / 4, out.mid_lo + 1, n - 1) - 1;

  RunningStats gap_mid, diag_mid, diff_mid, gap_full, diag_full, diff_full;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto qkv = gaussian_qkv(trial_config(n, d, seed, t));
    const auto attn = attention_matrix(causal_logits(qkv.q, qkv.k, ScaleMode::scaled_by_sqrt_d));
    const auto scores = h2o_scores(attn);
    auto pooled = [&](std::size_t lo, std::size_t hi, RunningStats& g, RunningStats& a,
                      RunningStats& diff) {
      double gap = 0.0;
      double diag = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        gap += scores[j + 1] - scores[j];
        diag += attn.row(j)[j];
      }
      const auto count = static_cast<double>(hi - lo + 1);
      g.add(gap / count);
      a.add(-diag / count);
      diff.add((gap - (-diag)) / count);
    };
    pooled(out.mid_lo, out.mid_hi, gap_mid, diag_mid, diff_mid);
    pooled(0, n - 2, gap_full, diag_full, diff_full);
  }
  out.gap_mid = McReport::from_stats("score_gap_mid", gap_mid, 0.0, PassRule::below_by_sigmas(5));
  out.neg_diag_mid = McReport::from_stats("neg_diag_mid", diag_mid, 0.0, PassRule::none());
  out.agreement_mid =
      McReport::from_stats("gap_minus_neg_diag_mid", diff_mid, 0.0, PassRule::within_sigmas(3));
  out.gap_full = McReport::from_stats("score_gap_full", gap_full, 0.0, PassRule::none());
  out.neg_diag_full = McReport::from_stats("neg_diag_full", diag_full, 0.0, PassRule::none());
  out.agreement_full =
      McReport::from_stats("gap_minus_neg_diag_full", diff_full, 0.0, PassRule::none());
  return out;
}

SlopeEstimate least_squares_slope(std::span<const double> y) {
  const std::size_t m = y.size();
  if (m < 2) return {};
  const double x_mean = static_cast<double>(m - 1) / 2.0;
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(m);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxx += dx * dx;
    sxy += dx * (y[i] - y_mean);
  }
  SlopeEstimate out;
  out.slope = sxy / sxx;
  if (m >= 3) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double fit = y_mean + out.slope * (static_cast<double>(i) - x_mean);
      ssr += (y[i] - fit) * (y[i] - fit);
    }
    out.std_error = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  }
  return out;
}

namespace {

struct ProfileAccumulator {
  std::vector<RunningStats> per_position;
  RunningStats slopes;

  explicit ProfileAccumulator(std::size_t positions) : per_position(positions) {}

  void add(std::span<const double> scores) {
    const auto used = scores.first(per_position.size());
    for (std::size_t j = 0; j < used.size(); ++j) per_position[j].add(used[j]);
    slopes.add(least_squares_slope(used).slope);
  }

  PositionProfile finish(std::string name, PassRule rule) const {
    PositionProfile p;
    p.mean.reserve(per_position.size());
    p.std_error.reserve(per_position.size());
    for (const auto& s : per_position) {
      p.mean.push_back(s.mean());
      p.std_error.push_back(s.std_error());
    }
    // The slope of the means equals the mean of per-trial slopes; its SE
    // comes from the trial-to-trial spread, which respects the correlation
    // between positions within one trial.
    p.slope = McReport::make(std::move(name), least_squares_slope(p.mean).slope,
                             slopes.std_error(), slopes.count(), 0.0, rule);
    return p;
  }
};

}  // namespace

DebiasReport mc_position_bias(std::size_t n, std::size_t d, std::size_t r, std::size_t trials,
                              std::uint64_t seed) {
  if (r == 0 || r >= n) throw std::invalid_argument("mc_position_bias: need 1 <= r < n");
  if (n - r < 3) throw std::invalid_argument("mc_position_bias: need at least 3 fitted positions");
  if (trials < 2) throw std::invalid_argument("mc_position_bias: trials must be >= 2");
  DebiasReport out;
  out.positions = n - r;
  ProfileAccumulator h2o(out.positions), recent(out.positions);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto qkv = gaussian_qkv(trial_config(n, d, seed, t));
    const auto attn = attention_matrix(causal_logits(qkv.q, qkv.k, ScaleMode::scaled_by_sqrt_d));
    h2o.add(h2o_scores(attn));
    recent.add(recent_accum_scores(attn, r));
  }
  out.h2o = h2o.finish("h2o_slope", PassRule::below_by_sigmas(5));
  out.recent = recent.finish("recent_slope", PassRule::within_sigmas(3));
  return out;
}

EntropyReport mc_entropy(std::size_t i, std::size_t d, double lambda, std::size_t trials,
                         std::uint64_t seed, ScaleMode mode, double rel_tol, EntropyTarget target) {
  if (i < 2) throw std::invalid_argument("mc_entropy: i must be >= 2");
  if (d == 0) throw std::invalid_argument("mc_entropy: d must be >= 1");
  if (trials == 0) throw std::invalid_argument("mc_entropy: trials must be >= 1");
  const double divisor = mode == ScaleMode::scaled_by_sqrt_d ? std::sqrt(static_cast<double>(d)) : 1.0;

  RunningStats entropy, logit;
  std::vector<double> row(i);
  std::vector<double> query(d);
  for (std::size_t t = 0; t < trials; ++t) {
    CounterRng rng(seed, t);
    for (double& x : query) x = rng.normal();
    std::vector<double> key(d);
    for (std::size_t j = 0; j < i; ++j) {
      for (double& x : key) x = rng.normal();
      row[j] = dot(query, key) / divisor;
      logit.add(row[j]);
    }
    entropy.add(sg_entropy(row, lambda));
  }

  EntropyReport out;
  out.i = i;
  out.lambda = lambda;
  out.logit_variance = logit.variance();
  const double nominal = mode == ScaleMode::scaled_by_sqrt_d ? 1.0 : static_cast<double>(d);
  out.target_nominal = expected_entropy(i, lambda * lambda * nominal);
  out.target_empirical = expected_entropy(i, lambda * lambda * out.logit_variance);
  const double chosen =
      target == EntropyTarget::nominal_variance ? out.target_nominal : out.target_empirical;
  out.in_regime = chosen >= std::log(static_cast<double>(i)) / 2.0;
  out.report = McReport::from_stats("entropy", entropy, chosen,
                                    out.in_regime ? PassRule::relative(rel_tol) : PassRule::none());
  return out;
}

std::pair<McReport, McReport> mc_lognormal(GaussianParams p, std::size_t trials, std::uint64_t seed) {
  if (p.sigma2 < 0.0) throw std::invalid_argument("mc_lognormal: negative variance");
  if (trials < 2) throw std::invalid_argument("mc_lognormal: trials must be >= 2");
  CounterRng rng(seed, 0x6C6F676EULL);
  const double sigma = std::sqrt(p.sigma2);
  RunningStats ex, xex;
  for (std::size_t t = 0; t < trials; ++t) {
    const double x = p.mu + sigma * rng.normal();
    const double e = std::exp(x);
    ex.add(e);
    xex.add(x * e);
  }
  return {McReport::from_stats("E[e^x]", ex, lognormal_mean(p), PassRule::within_sigmas(3)),
          McReport::from_stats("E[x e^x]", xex, lognormal_xexp_mean(p), PassRule::within_sigmas(3))};
}

BiasMetrics bias_metrics(std::span<const std::size_t> retained, std::size_t lo, std::size_t hi) {
  if (retained.empty()) throw std::invalid_argument("bias_metrics: empty retained set");
  if (hi < lo) throw std::invalid_argument("bias_metrics: empty domain");
  const double slots = static_cast<double>(hi - lo + 1);
  std::vector<double> u;
  u.reserve(retained.size());
  double sum = 0.0;
  for (std::size_t j : retained) {
    if (j < lo || j > hi) throw std::invalid_argument("bias_metrics: index outside domain");
    sum += static_cast<double>(j - lo);
    u.push_back((static_cast<double>(j - lo) + 0.5) / slots);
  }
  std::sort(u.begin(), u.end());
  const double k = static_cast<double>(u.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double above = static_cast<double>(i + 1) / k - u[i];
    const double below = u[i] - static_cast<double>(i) / k;
    ks = std::max({ks, above, below});
  }
  BiasMetrics m;
  m.mean_retained_index_ratio = hi == lo ? 0.5 : (sum / k) / static_cast<double>(hi - lo);
  m.ks_to_uniform = std::clamp(ks, 0.0, 1.0);
  return m;
}

BiasMetrics bias_metrics(std::span<const std::size_t> retained, std::size_t n,
                         std::span<const double> position_means) {
  if (n == 0) throw std::invalid_argument("bias_metrics: n must be >= 1");
  auto m = bias_metrics(retained, 0, n - 1);
  if (!position_means.empty()) m.slope_of_position_means = least_squares_slope(position_means);
  return m;
}

double RetentionCurves::fraction_refined_at_or_below() const {
  if (thresholds.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (refined[t] <= plain[t]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(thresholds.size());
}

namespace {

std::vector<double> fraction_at_least(std::span<const double> scores,
                                      std::span<const double> thresholds) {
  double peak = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) throw std::invalid_argument("retention curve: bad score");
    peak = std::max(peak, s);
  }
  std::vector<double> normalized(scores.begin(), scores.end());
  for (double& s : normalized) s = peak > 0.0 ? s / peak : 0.0;
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double tau : thresholds) {
    const auto hits = std::count_if(normalized.begin(), normalized.end(),
                                    [tau](double s) { return s >= tau; });
    out.push_back(static_cast<double>(hits) / static_cast<double>(normalized.size()));
  }
  return out;
}

}  // namespace

RetentionCurves retention_ratio_curve(std::span<const double> scores,
                                      std::span<const double> refined,
                                      std::span<const double> thresholds) {
  if (scores.empty() || scores.size() != refined.size())
    throw std::invalid_argument("retention_ratio_curve: score vectors must be nonempty and equal length");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("retention_ratio_curve: thresholds must be sorted");
  return {std::vector<double>(thresholds.begin(), thresholds.end()),
          fraction_at_least(scores, thresholds), fraction_at_least(refined, thresholds)};
}

std::vector<double> threshold_grid(std::size_t count, double tau_max) {
  if (count < 2) throw std::invalid_argument("threshold_grid: need at least 2 thresholds");
  if (!(tau_max > 0.0)) throw std::invalid_argument("threshold_grid: tau_max must be > 0");
  std::vector<double> out(count);
  for (std::size_t t = 0; t < count; ++t)
    out[t] = tau_max * static_cast<double>(t) / static_cast<double>(count - 1);
  return out;
}

std::string_view to_string(SparsityBase base) noexcept {
  return base == SparsityBase::aha ? "aha" : "h2o";
}

SparsityBase sparsity_base_from_string(std::string_view name) {
  if (name == "aha") return SparsityBase::aha;
  if (name == "h2o") return SparsityBase::h2o;
  throw std::invalid_argument("unknown sparsity base '" + std::string(name) + "'");
}

RetentionCurves sparsity_instance(std::size_t n, std::size_t d, const PolicyConfig& cfg,
                                  SparsityBase base, std::uint64_t seed,
                                  std::span<const double> thresholds) {
  cfg.validate();
  const auto qkv = gaussian_qkv({n, d, seed, ScaleMode::scaled_by_sqrt_d});
  const auto logits = causal_logits(qkv.q, qkv.k, ScaleMode::scaled_by_sqrt_d);
  const ScoreVec raw = base == SparsityBase::aha
                           ? sg_recent_scores(logits, std::min(cfg.recent_budget, n), cfg.lambda_schedule)
                           : h2o_scores(attention_matrix(logits));
  const auto refined = refine_scores(raw, value_prior(qkv.v, cfg.pool_kernel));
  return retention_ratio_curve(raw, refined, thresholds);
}

RetentionSample positional_retention(std::size_t n, std::size_t d, std::size_t total_budget,
                                     std::size_t recent_budget, std::uint64_t seed) {
  if (recent_budget >= n) throw std::invalid_argument("positional_retention: need Br < n");
  const auto qkv = gaussian_qkv({n, d, seed, ScaleMode::scaled_by_sqrt_d});
  RetentionSample s;
  s.aha = prefill_head(qkv, PolicyConfig::make(PolicyKind::aha, total_budget, recent_budget, d)).indices;
  s.h2o = prefill_head(qkv, PolicyConfig::make(PolicyKind::h2o, total_budget, recent_budget, d)).indices;
  s.aha_all = bias_metrics(s.aha, n);
  s.h2o_all = bias_metrics(s.h2o, n);
  auto selected = [&](const RetainedSet& r) {
    RetainedSet out;
    for (std::size_t j : r) {
      if (j < n - recent_budget) out.push_back(j);
    }
    return out;
  };
  const auto aha_sel = selected(s.aha);
  const auto h2o_sel = selected(s.h2o);
  if (!aha_sel.empty()) s.aha_selected = bias_metrics(aha_sel, 0, n - recent_budget - 1);
  if (!h2o_sel.empty()) s.h2o_selected = bias_metrics(h2o_sel, 0, n - recent_budget - 1);
  return s;
}

}  // namespace ahakv
