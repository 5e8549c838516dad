#pragma once

// Scalar and vector primitives shared by every scoring path: softmax and its
// step-gain variant, row entropy, the lambda schedule, mean filtering, and
// closed-form lognormal moments.

#include <cstddef>
#include <span>
#include <vector>

namespace ahakv {

/// Probability row: nonnegative entries summing to one.
using ProbRow = std::vector<double>;

/// Max-subtracted softmax. Throws std::invalid_argument on an empty or
/// non-finite row.
ProbRow softmax(std::span<const double> logits);

/// Step-gain softmax: softmax of the elementwise product lambda * x.
/// lambda must be finite and >= 0; lambda == 0 yields the uniform row.
ProbRow sg_softmax(std::span<const double> logits, double lambda);

/// Shannon entropy in nats with the 0 * ln 0 = 0 convention, clamped to
/// [0, ln m].
double row_entropy(std::span<const double> probs);

/// Entropy of sg_softmax(logits, lambda) computed from the logits as
/// ln Z - sum p y with y = lambda x - max. A constant row gives ln m exactly.
double sg_entropy(std::span<const double> logits, double lambda);

/// Parameters of the length-adaptive scale lambda(i) = sqrt(2 ln(i/k) / d),
/// floored at `floor` and taken as 0 before the log turns positive.
struct LambdaSchedule {
  std::size_t budget_k = 1;
  std::size_t head_dim = 1;
  double floor = 0.0;

  /// Schedule with floor 1/sqrt(d).
  static LambdaSchedule with_default_floor(std::size_t budget_k, std::size_t head_dim);
  /// Schedule that always returns `value`: budget_k is the largest size, so
  /// the log term never switches on. Handy for reductions to plain softmax.
  static LambdaSchedule constant(double value, std::size_t head_dim = 1);

  void validate() const;
};

double lambda_for(const LambdaSchedule& schedule, std::size_t i);

/// Approximate E[H_i] for i Gaussian logits with variance sigma2_logit:
/// ln i - sigma2_logit / 2. Not clamped; it goes negative outside the
/// regime where the approximation holds.
double expected_entropy(std::size_t i, double sigma2_logit);

struct GaussianParams {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// E[e^x] for x ~ N(mu, sigma2).
double lognormal_mean(GaussianParams p);
/// E[x e^x] for x ~ N(mu, sigma2).
double lognormal_xexp_mean(GaussianParams p);

/// Centered moving average with replicate (edge-clamp) padding.
/// `kernel` must be odd and >= 1.
std::vector<double> avgpool_1d(std::span<const double> values, std::size_t kernel);

}  // namespace ahakv
