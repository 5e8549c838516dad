#include "ahakv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ahakv {

ProbRow softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty row");
  double peak = logits[0];
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite logit");
    peak = std::max(peak, x);
  }
  ProbRow out(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - peak);
    total += out[j];
  }
  for (double& p : out) p /= total;
  return out;
}

ProbRow sg_softmax(std::span<const double> logits, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::invalid_argument("sg_softmax: lambda must be finite and >= 0");
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& x : scaled) x *= lambda;
  return softmax(scaled);
}

double row_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  const double cap = probs.empty() ? 0.0 : std::log(static_cast<double>(probs.size()));
  return std::clamp(h, 0.0, cap);
}

double sg_entropy(std::span<const double> logits, double lambda) {
  if (logits.empty()) throw std::invalid_argument("sg_entropy: empty row");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::invalid_argument("sg_entropy: lambda must be finite and >= 0");
  double peak = lambda * logits[0];
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("sg_entropy: non-finite logit");
    peak = std::max(peak, lambda * x);
  }
  double z = 0.0, weighted = 0.0;
  for (double x : logits) {
    const double y = lambda * x - peak;
    const double e = std::exp(y);
    z += e;
    weighted += e * y;
  }
  const double h = std::log(z) - weighted / z;
  return std::clamp(h, 0.0, std::log(static_cast<double>(logits.size())));
}

LambdaSchedule LambdaSchedule::with_default_floor(std::size_t budget_k, std::size_t head_dim) {
  return {budget_k, head_dim, 1.0 / std::sqrt(static_cast<double>(head_dim))};
}

LambdaSchedule LambdaSchedule::constant(double value, std::size_t head_dim) {
  return {std::numeric_limits<std::size_t>::max(), head_dim, value};
}

void LambdaSchedule::validate() const {
  if (budget_k == 0) throw std::invalid_argument("LambdaSchedule: budget_k must be >= 1");
  if (head_dim == 0) throw std::invalid_argument("LambdaSchedule: head_dim must be >= 1");
  if (!std::isfinite(floor) || floor < 0.0)
    throw std::invalid_argument("LambdaSchedule: floor must be finite and >= 0");
}

double lambda_for(const LambdaSchedule& schedule, std::size_t i) {
  schedule.validate();
  if (i == 0) throw std::invalid_argument("lambda_for: i must be >= 1");
  double raw = 0.0;
  if (i > schedule.budget_k) {
    const double ratio = static_cast<double>(i) / static_cast<double>(schedule.budget_k);
    raw = std::sqrt(2.0 * std::log(ratio) / static_cast<double>(schedule.head_dim));
  }
  return std::max(schedule.floor, raw);
}

double expected_entropy(std::size_t i, double sigma2_logit) {
  if (i == 0) throw std::invalid_argument("expected_entropy: i must be >= 1");
  return std::log(static_cast<double>(i)) - sigma2_logit / 2.0;
}

double lognormal_mean(GaussianParams p) {
  if (p.sigma2 < 0.0) throw std::invalid_argument("lognormal_mean: negative variance");
  return std::exp(p.mu + p.sigma2 / 2.0);
}

double lognormal_xexp_mean(GaussianParams p) {
  if (p.sigma2 < 0.0) throw std::invalid_argument("lognormal_xexp_mean: negative variance");
  return std::exp(p.mu + p.sigma2 / 2.0) * (p.mu + p.sigma2);
}

std::vector<double> avgpool_1d(std::span<const double> values, std::size_t kernel) {
  if (values.empty()) throw std::invalid_argument("avgpool_1d: empty input");
  if (kernel == 0 || kernel % 2 == 0)
    throw std::invalid_argument("avgpool_1d: kernel must be odd and >= 1");
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  auto at = [&](std::ptrdiff_t t) {
    return values[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, n - 1))];
  };
  std::vector<double> out(values.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    // Mirrored pairs are summed first so reversing the input reverses the
    // output bit for bit.
    double acc = at(t);
    double lo = acc;
    double hi = acc;
    for (std::ptrdiff_t o = 1; o <= half; ++o) {
      const double left = at(t - o);
      const double right = at(t + o);
      acc += left + right;
      lo = std::min({lo, left, right});
      hi = std::max({hi, left, right});
    }
    out[static_cast<std::size_t>(t)] = std::clamp(acc / static_cast<double>(kernel), lo, hi);
  }
  return out;
}

}  // namespace ahakv
