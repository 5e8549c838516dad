#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "ahakv/toy_model.hpp"

using namespace ahakv;

TEST_CASE("toy model is deterministic and position aware") {
  const ToyModelConfig cfg{32, 2, 2, 4, 2, 17};
  const auto a = build_toy_model(cfg), b = build_toy_model(cfg);
  const std::vector<TokenId> p{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(a.forward(p) == b.forward(p));
  CHECK(a.forward(std::vector<TokenId>{7}).size() == 32);
  std::vector<TokenId> swapped{1, 3, 4, 1, 5, 9, 2, 6};
  CHECK(a.forward(p) != a.forward(swapped));
  auto other = cfg;
  other.seed = 18;
  CHECK(build_toy_model(other).forward(p) != a.forward(p));
}

TEST_CASE("invalid model inputs") {
  CHECK_THROWS_AS(build_toy_model({0, 1, 1, 4, 1, 0}), std::invalid_argument);
  const auto m = build_toy_model({16, 1, 1, 4, 1, 0});
  CHECK_THROWS_AS(m.forward(std::vector<TokenId>{}), std::invalid_argument);
  CHECK_THROWS_AS(m.forward(std::vector<TokenId>{16}), std::invalid_argument);
  CHECK_THROWS_AS(m.forward(std::vector<TokenId>{-1}), std::invalid_argument);
  FullKvCache cache(1, 1);
  CHECK_THROWS_AS(greedy_decode(m, std::vector<TokenId>{99}, 0, cache), std::invalid_argument);
}

TEST_CASE("greedy decoding") {
  const auto m = build_toy_model({40, 2, 3, 4, 2, 3});
  const auto prompt = random_prompt(25, 40, 1);
  FullKvCache empty(2, 3);
  CHECK(greedy_decode(m, prompt, 0, empty).empty());
  for (std::size_t steps : {1u, 5u, 12u}) {
    FullKvCache cache(2, 3);
    const auto got = greedy_decode(m, prompt, steps, cache);
    CHECK(got.size() == steps);
    CHECK(got == reference_decode(m, prompt, steps));
    FullKvCache again(2, 3);
    CHECK(greedy_decode(m, prompt, steps, again) == got);
  }
}

TEST_CASE("cached and uncached logits are bit identical") {
  const auto m = build_toy_model({20, 2, 2, 4, 2, 8});
  const auto prompt = random_prompt(9, 20, 2);
  FullKvCache cache(2, 2);
  auto logits = m.prefill(prompt, cache);
  CHECK(logits == m.forward(prompt));
  std::vector<TokenId> seq = prompt;
  for (int t = 0; t < 4; ++t) {
    const TokenId next = argmax_token(logits);
    logits = m.decode_step(next, seq.size(), cache);
    seq.push_back(next);
    CHECK(logits == m.forward(seq));
  }
}

TEST_CASE("helpers") {
  CHECK(argmax_token(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK_THROWS_AS(argmax_token(std::vector<double>{}), std::invalid_argument);
  const auto p = random_prompt(100, 7, 3);
  CHECK(p == random_prompt(100, 7, 3));
  for (auto t : p) CHECK((t >= 0 && t < 7));
  std::vector<double> q{1, 0}, out;
  auto keys = Matrix::from_rows({{1, 0}, {0, 1}});
  auto vals = Matrix::from_rows({{2, 0}, {0, 4}});
  out = attend_rows(q, keys, vals);
  const double w0 = 1 / (1 + std::exp(-1 / std::sqrt(2.0)));
  CHECK(out[0] == doctest::Approx(2 * w0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(4 * (1 - w0)).epsilon(1e-14));
}
