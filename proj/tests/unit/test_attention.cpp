#include "doctest.h"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ahakv/attention_sim.hpp"

using namespace ahakv;
using doctest::Approx;

TEST_CASE("gaussian_qkv is deterministic per seed") {
  const SynthConfig cfg{16, 4, 99, ScaleMode::scaled_by_sqrt_d};
  const auto a = gaussian_qkv(cfg), b = gaussian_qkv(cfg);
  CHECK(a.q == b.q);
  CHECK(a.k == b.k);
  CHECK(a.v == b.v);
  CHECK(a.q != a.k);
  auto other = cfg;
  other.seed = 100;
  CHECK(gaussian_qkv(other).q != a.q);
}

TEST_CASE("gaussian_qkv moments") {
  const auto s = gaussian_qkv({4096, 64, 2024, ScaleMode::scaled_by_sqrt_d});
  const double count = 4096.0 * 64.0;
  for (const Matrix* m : {&s.q, &s.k, &s.v}) {
    double sum = 0, sq = 0;
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (double x : m->row(r)) {
        sum += x;
        sq += x * x;
      }
    const double mean = sum / count;
    const double var = (sq - count * mean * mean) / (count - 1);
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(count));
    CHECK(std::abs(var - 1.0) <= 0.05);
  }
}

TEST_CASE("causal logits by hand") {
  auto q = Matrix::from_rows({{2}, {3}});
  auto k = Matrix::from_rows({{1}, {4}});
  const auto w = causal_logits(q, k, ScaleMode::unscaled);
  CHECK(w.w == LowerTriangular::from_rows({{2}, {3, 12}}));

  auto eye = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto id = causal_logits(eye, eye, ScaleMode::unscaled);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j <= i; ++j) CHECK(id.w.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("scaled logits are the unscaled ones divided by sqrt d") {
  const auto s = gaussian_qkv({12, 5, 1, ScaleMode::unscaled});
  const auto raw = causal_logits(s.q, s.k, ScaleMode::unscaled);
  const auto scaled = causal_logits(s.q, s.k, ScaleMode::scaled_by_sqrt_d);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j <= i; ++j) CHECK(scaled.w.at(i, j) == raw.w.at(i, j) / std::sqrt(5.0));
  CHECK(logit_scale(ScaleMode::unscaled, 5) == 1.0);
  CHECK(logit_scale(ScaleMode::scaled_by_sqrt_d, 4) == 0.5);
}

TEST_CASE("causal logits reject shape mismatch") {
  auto q = Matrix::from_rows({{1, 2}, {3, 4}});
  auto k = Matrix::from_rows({{1, 2}});
  auto k3 = Matrix::from_rows({{1, 2, 3}, {1, 2, 3}});
  CHECK_THROWS_AS(causal_logits(q, k, ScaleMode::unscaled), std::invalid_argument);
  CHECK_THROWS_AS(causal_logits(q, k3, ScaleMode::unscaled), std::invalid_argument);
}

TEST_CASE("attention matrix rows") {
  const auto s = gaussian_qkv({40, 8, 5, ScaleMode::scaled_by_sqrt_d});
  const auto a = attention_matrix(causal_logits(s.q, s.k, ScaleMode::scaled_by_sqrt_d));
  CHECK(a.row(0)[0] == 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto r = a.row(i);
    CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) <= 1e-12);
  }
  CausalLogits zero{LowerTriangular::from_rows({{0}, {0, 0}, {0, 0, 0}}), 1.0};
  const auto u = attention_matrix(zero);
  for (std::size_t i = 0; i < 3; ++i)
    for (double p : u.row(i)) CHECK(p == Approx(1.0 / static_cast<double>(i + 1)).epsilon(1e-15));
}

TEST_CASE("scale mode names round trip") {
  for (auto m : {ScaleMode::scaled_by_sqrt_d, ScaleMode::unscaled})
    CHECK(scale_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(scale_mode_from_string("cubic"), std::invalid_argument);
}
