#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "ahakv/stats_verify.hpp"

using namespace ahakv;
using doctest::Approx;

TEST_CASE("running stats") {
  RunningStats s;
  for (double x : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) s.add(x);
  CHECK(s.count() == 8);
  CHECK(s.mean() == Approx(5.0));
  CHECK(s.variance() == Approx(32.0 / 7.0));
  CHECK(s.std_error() == Approx(std::sqrt(32.0 / 7.0 / 8.0)));
  RunningStats one;
  one.add(3);
  CHECK(one.variance() == 0.0);
}

TEST_CASE("pass rules") {
  CHECK(judge(PassRule::within_sigmas(3), 1.0, 0.1, 1.25));
  CHECK_FALSE(judge(PassRule::within_sigmas(3), 1.0, 0.1, 1.35));
  CHECK(judge(PassRule::below_by_sigmas(5), -0.6, 0.1, 0.0));
  CHECK_FALSE(judge(PassRule::below_by_sigmas(5), -0.4, 0.1, 0.0));
  CHECK(judge(PassRule::relative(0.05), 104, 0, 100));
  CHECK_FALSE(judge(PassRule::relative(0.05), 106, 0, 100));
}

TEST_CASE("least squares slope") {
  std::vector<double> y{1, 3, 5, 7, 9};
  const auto f = least_squares_slope(y);
  CHECK(f.slope == Approx(2.0));
  CHECK(f.std_error == Approx(0.0).epsilon(1e-12));
  std::vector<double> noisy{0, 1.1, 1.9, 3.2, 3.9, 5.05};
  CHECK(least_squares_slope(noisy).slope == Approx(1.0).epsilon(0.05));
  CHECK(least_squares_slope(noisy).std_error > 0.0);
}

TEST_CASE("score gap at two tokens") {
  const auto r = mc_score_gap(2, 8, 400, 5);
  CHECK(r.neg_diag_full.estimate == -1.0);
  CHECK(std::abs(r.gap_full.estimate + 1.0) <= 3 * r.gap_full.std_error);
  CHECK_THROWS_AS(mc_score_gap(1, 8, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(mc_score_gap(8, 8, 1, 1), std::invalid_argument);
}

TEST_CASE("score gap is negative on a small instance") {
  const auto r = mc_score_gap(128, 16, 60, 9);
  CHECK(r.gap_mid.estimate < 0);
  CHECK(r.gap_mid.pass);
  CHECK(r.agreement_mid.pass);
}

TEST_CASE("entropy checks") {
  const auto zero = mc_entropy(64, 16, 0.0, 5, 1, ScaleMode::scaled_by_sqrt_d);
  CHECK(zero.report.estimate == std::log(64.0));
  CHECK(zero.report.target == std::log(64.0));
  CHECK(zero.report.pass);
  const auto one = mc_entropy(256, 16, 1.0, 50, 2, ScaleMode::scaled_by_sqrt_d);
  CHECK(one.in_regime);
  CHECK(one.report.pass);
  CHECK(std::abs(one.logit_variance - 1.0) < 0.2);
  const auto deep = mc_entropy(4, 16, 6.0, 20, 3, ScaleMode::scaled_by_sqrt_d);
  CHECK_FALSE(deep.in_regime);
  CHECK_FALSE(deep.report.judged());
  CHECK_THROWS_AS(mc_entropy(1, 16, 1.0, 5, 1, ScaleMode::unscaled), std::invalid_argument);
}

TEST_CASE("lognormal checks") {
  auto [e0, x0] = mc_lognormal({0, 0}, 1000, 1);
  CHECK(e0.estimate == 1.0);
  CHECK(x0.estimate == 0.0);
  CHECK(e0.pass);
  CHECK(x0.pass);
  auto [e1, x1] = mc_lognormal({0, 1}, 100000, 2);
  CHECK(e1.pass);
  CHECK(x1.pass);
  CHECK(std::abs(e1.estimate - std::exp(0.5)) < 0.01 * std::exp(0.5));
}

TEST_CASE("bias metrics") {
  std::vector<std::size_t> all(100);
  for (std::size_t j = 0; j < 100; ++j) all[j] = j;
  const auto m = bias_metrics(all, 100);
  CHECK(m.mean_retained_index_ratio == Approx(0.5).epsilon(1e-14));
  CHECK(m.ks_to_uniform == Approx(1.0 / 200).epsilon(1e-12));
  std::vector<std::size_t> prefix{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto p = bias_metrics(prefix, 100);
  CHECK(p.mean_retained_index_ratio == Approx(9.0 / (2 * 99)).epsilon(1e-14));
  CHECK(p.ks_to_uniform > 0.85);
  std::vector<double> means{5, 4, 3, 2, 1};
  CHECK(bias_metrics(prefix, 100, means).slope_of_position_means->slope == Approx(-1.0));
  std::vector<std::size_t> one{3};
  CHECK(bias_metrics(one, 3, 3).mean_retained_index_ratio == 0.5);
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(bias_metrics(none, 10), std::invalid_argument);
}

TEST_CASE("retention curves") {
  const auto grid = threshold_grid(111, 1.1);
  CHECK(grid.size() == 111);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.1);
  std::vector<double> s{4, 2, 1, 0.5}, r{2, 2, 0.1, 0.1};
  const auto c = retention_ratio_curve(s, r, grid);
  CHECK(c.plain.front() == 1.0);
  CHECK(c.refined.front() == 1.0);
  CHECK(c.plain.back() == 0.0);
  CHECK(c.refined.back() == 0.0);
  for (std::size_t t = 1; t < grid.size(); ++t) {
    CHECK(c.plain[t] <= c.plain[t - 1]);
    CHECK(c.refined[t] <= c.refined[t - 1]);
  }
  std::vector<double> unsorted{0.5, 0.1};
  CHECK_THROWS_AS(retention_ratio_curve(s, r, unsorted), std::invalid_argument);
}

TEST_CASE("sparsity instance direction") {
  const auto cfg = PolicyConfig::make(PolicyKind::aha, 256, 32, 64);
  const auto grid = threshold_grid(111, 1.1);
  int good = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto c = sparsity_instance(2048, 64, cfg, SparsityBase::aha, s, grid);
    good += c.fraction_refined_at_or_below() >= 0.9;
  }
  CHECK(good >= 4);
}

TEST_CASE("positional retention direction") {
  const auto r = positional_retention(512, 16, 64, 8, 4);
  CHECK(r.aha.size() == 64);
  CHECK(r.h2o.size() == 64);
  CHECK(r.h2o_all.mean_retained_index_ratio < r.aha_all.mean_retained_index_ratio);
}
