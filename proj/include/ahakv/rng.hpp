#pragma once

#include <cstdint>

namespace ahakv {

/// Stateless 64-bit finalizer (splitmix64 mixing function).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent child seed for `stream` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Counter-based generator: the n-th draw of stream (seed, id) is a pure
/// function of (seed, id, n). Streams never share state, so per-trial and
/// per-head draws are reproducible regardless of execution order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller; both variates of each pair are used.
  double normal() noexcept;

  /// Child stream keyed by this stream's key and `id`. Does not advance *this.
  CounterRng substream(std::uint64_t id) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ahakv
