#include "ahakv/toy_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ahakv/numerics.hpp"
#include "ahakv/rng.hpp"

namespace ahakv {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kNormEps = 1e-5;

Matrix gaussian_matrix(CounterRng rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = stddev * rng.normal();
  return m;
}

// out[c] = sum_r x[r] * w(r, c), accumulated in r order.
std::vector<double> matvec(std::span<const double> x, const Matrix& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double xr = x[r];
    auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += xr * row[c];
  }
  return out;
}

std::vector<double> layer_norm(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + kNormEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv;
  return out;
}

double gelu(double x) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

std::span<const double> head_slice(const std::vector<double>& full, std::size_t head,
                                   std::size_t head_dim) {
  return std::span<const double>(full).subspan(head * head_dim, head_dim);
}

}  // namespace

void ToyModelConfig::validate() const {
  if (vocab == 0 || layers == 0 || heads == 0 || head_dim == 0 || mlp_mult == 0)
    throw std::invalid_argument("ToyModelConfig: all counts must be >= 1");
}

std::vector<double> attend_rows(std::span<const double> query, const Matrix& keys,
                                const Matrix& values, std::size_t count) {
  const std::size_t m = count == 0 ? keys.rows() : count;
  if (m == 0 || m > keys.rows() || m > values.rows())
    throw std::invalid_argument("attend_rows: bad row count");
  if (query.size() != keys.cols())
    throw std::invalid_argument("attend_rows: query has " + std::to_string(query.size()) +
                                " dims, keys have " + std::to_string(keys.cols()));
  const double divisor = std::sqrt(static_cast<double>(query.size()));
  std::vector<double> logits(m);
  for (std::size_t j = 0; j < m; ++j) logits[j] = dot(query, keys.row(j)) / divisor;
  const auto probs = softmax(logits);
  std::vector<double> out(values.cols(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    auto v = values.row(j);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += probs[j] * v[c];
  }
  return out;
}

FullKvCache::FullKvCache(std::size_t layers, std::size_t heads)
    : heads_(heads), keys_(layers * heads), values_(layers * heads) {}

void FullKvCache::prefill(std::size_t layer, std::size_t head, const QkvSet& qkv) {
  keys_.at(layer * heads_ + head) = qkv.k;
  values_.at(layer * heads_ + head) = qkv.v;
}

std::vector<double> FullKvCache::attend(std::size_t layer, std::size_t head,
                                        std::span<const double> q, std::span<const double> k,
                                        std::span<const double> v) {
  auto& keys = keys_.at(layer * heads_ + head);
  auto& values = values_.at(layer * heads_ + head);
  keys.append_row(k);
  values.append_row(v);
  return attend_rows(q, keys, values);
}

ToyModel::ToyModel(const ToyModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t dim = cfg_.model_dim();
  const std::size_t hidden = dim * cfg_.mlp_mult;
  const double out_std = kInitStd / std::sqrt(static_cast<double>(cfg_.layers));
  CounterRng root(cfg_.seed, 0x70796D6FULL);
  embedding_ = gaussian_matrix(root.substream(0), cfg_.vocab, dim, kInitStd);
  layers_.reserve(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const CounterRng lr = root.substream(1 + l);
    layers_.push_back(Layer{
        gaussian_matrix(lr.substream(0), dim, dim, kInitStd),
        gaussian_matrix(lr.substream(1), dim, dim, kInitStd),
        gaussian_matrix(lr.substream(2), dim, dim, kInitStd),
        gaussian_matrix(lr.substream(3), dim, dim, out_std),
        gaussian_matrix(lr.substream(4), dim, hidden, kInitStd),
        gaussian_matrix(lr.substream(5), hidden, dim, out_std),
    });
  }
}

void ToyModel::check_token(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= cfg_.vocab)
    throw std::invalid_argument("token id " + std::to_string(token) + " outside vocabulary of " +
                                std::to_string(cfg_.vocab));
}

std::vector<double> ToyModel::embed(TokenId token, std::size_t position) const {
  const std::size_t dim = cfg_.model_dim();
  auto row = embedding_.row(static_cast<std::size_t>(token));
  std::vector<double> x(row.begin(), row.end());
  // Sinusoidal position signal at the same RMS as the embeddings.
  const double amp = kInitStd * std::numbers::sqrt2;
  for (std::size_t c = 0; c + 1 < dim; c += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(c) / static_cast<double>(dim));
    const double angle = static_cast<double>(position) * freq;
    x[c] += amp * std::sin(angle);
    x[c + 1] += amp * std::cos(angle);
  }
  return x;
}

std::vector<double> ToyModel::mlp_residual(const Layer& layer, std::vector<double> x) const {
  auto hidden = matvec(layer_norm(x), layer.w1);
  for (double& h : hidden) h = gelu(h);
  const auto out = matvec(hidden, layer.w2);
  for (std::size_t c = 0; c < x.size(); ++c) x[c] += out[c];
  return x;
}

std::vector<double> ToyModel::output_logits(std::span<const double> x) const {
  const auto h = layer_norm(x);
  std::vector<double> logits(cfg_.vocab);
  for (std::size_t t = 0; t < cfg_.vocab; ++t) logits[t] = dot(h, embedding_.row(t));
  return logits;
}

std::vector<double> ToyModel::run_prompt(std::span<const TokenId> tokens, KvCacheHook* cache) const {
  if (tokens.empty()) throw std::invalid_argument("ToyModel: prompt must be nonempty");
  for (TokenId t : tokens) check_token(t);
  const std::size_t n = tokens.size();
  const std::size_t hd = cfg_.head_dim;

  std::vector<std::vector<double>> xs;
  xs.reserve(n);
  for (std::size_t p = 0; p < n; ++p) xs.push_back(embed(tokens[p], p));

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Layer& layer = layers_[l];
    std::vector<std::vector<double>> qs(n), ks(n), vs(n);
    for (std::size_t p = 0; p < n; ++p) {
      const auto h = layer_norm(xs[p]);
      qs[p] = matvec(h, layer.wq);
      ks[p] = matvec(h, layer.wk);
      vs[p] = matvec(h, layer.wv);
    }
    std::vector<std::vector<double>> concat(n, std::vector<double>(cfg_.model_dim()));
    for (std::size_t head = 0; head < cfg_.heads; ++head) {
      QkvSet qkv;
      for (std::size_t p = 0; p < n; ++p) {
        qkv.q.append_row(head_slice(qs[p], head, hd));
        qkv.k.append_row(head_slice(ks[p], head, hd));
        qkv.v.append_row(head_slice(vs[p], head, hd));
      }
      for (std::size_t p = 0; p < n; ++p) {
        const auto out = attend_rows(qkv.q.row(p), qkv.k, qkv.v, p + 1);
        std::copy(out.begin(), out.end(), concat[p].begin() + static_cast<std::ptrdiff_t>(head * hd));
      }
      if (cache != nullptr) cache->prefill(l, head, qkv);
    }
    for (std::size_t p = 0; p < n; ++p) {
      const auto proj = matvec(concat[p], layer.wo);
      for (std::size_t c = 0; c < proj.size(); ++c) xs[p][c] += proj[c];
      xs[p] = mlp_residual(layer, std::move(xs[p]));
    }
  }
  return output_logits(xs.back());
}

std::vector<double> ToyModel::forward(std::span<const TokenId> tokens) const {
  return run_prompt(tokens, nullptr);
}

std::vector<double> ToyModel::prefill(std::span<const TokenId> prompt, KvCacheHook& cache) const {
  return run_prompt(prompt, &cache);
}

std::vector<double> ToyModel::decode_step(TokenId token, std::size_t position,
                                          KvCacheHook& cache) const {
  check_token(token);
  const std::size_t hd = cfg_.head_dim;
  auto x = embed(token, position);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Layer& layer = layers_[l];
    const auto h = layer_norm(x);
    const auto q = matvec(h, layer.wq);
    const auto k = matvec(h, layer.wk);
    const auto v = matvec(h, layer.wv);
    std::vector<double> concat(cfg_.model_dim());
    for (std::size_t head = 0; head < cfg_.heads; ++head) {
      const auto out = cache.attend(l, head, head_slice(q, head, hd), head_slice(k, head, hd),
                                    head_slice(v, head, hd));
      if (out.size() != hd) throw std::runtime_error("KvCacheHook::attend returned wrong width");
      std::copy(out.begin(), out.end(), concat.begin() + static_cast<std::ptrdiff_t>(head * hd));
    }
    const auto proj = matvec(concat, layer.wo);
    for (std::size_t c = 0; c < proj.size(); ++c) x[c] += proj[c];
    x = mlp_residual(layer, std::move(x));
  }
  return output_logits(x);
}

ToyModel build_toy_model(const ToyModelConfig& cfg) { return ToyModel(cfg); }

TokenId argmax_token(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax_token: empty logits");
  std::size_t best = 0;
  for (std::size_t t = 1; t < logits.size(); ++t) {
    if (logits[t] > logits[best]) best = t;
  }
  return static_cast<TokenId>(best);
}

std::vector<TokenId> greedy_decode(const ToyModel& model, std::span<const TokenId> prompt,
                                   std::size_t steps, KvCacheHook& cache) {
  if (prompt.empty()) throw std::invalid_argument("greedy_decode: prompt must be nonempty");
  for (TokenId t : prompt) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.config().vocab)
      throw std::invalid_argument("greedy_decode: token id " + std::to_string(t) +
                                  " outside vocabulary");
  }
  std::vector<TokenId> out;
  if (steps == 0) return out;
  out.reserve(steps);
  auto logits = model.prefill(prompt, cache);
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenId next = argmax_token(logits);
    out.push_back(next);
    cache.on_token(t, next);
    if (t + 1 < steps) logits = model.decode_step(next, prompt.size() + t, cache);
  }
  return out;
}

std::vector<TokenId> reference_decode(const ToyModel& model, std::span<const TokenId> prompt,
                                      std::size_t steps) {
  if (prompt.empty()) throw std::invalid_argument("reference_decode: prompt must be nonempty");
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenId next = argmax_token(model.forward(seq));
    out.push_back(next);
    seq.push_back(next);
  }
  return out;
}

std::vector<TokenId> random_prompt(std::size_t length, std::size_t vocab, std::uint64_t seed) {
  if (vocab == 0) throw std::invalid_argument("random_prompt: empty vocabulary");
  CounterRng rng(seed, 0x70726F6DULL);
  std::vector<TokenId> out(length);
  for (auto& t : out) t = static_cast<TokenId>(rng.next_u64() % vocab);
  return out;
}

}  // namespace ahakv
