#include "ahakv/rng.hpp"

#include <cmath>
#include <numbers>

namespace ahakv {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(derive_seed(seed, stream)) {}

std::uint64_t CounterRng::next_u64() noexcept {
  // Two rounds keep adjacent counters decorrelated for nearby keys.
  const std::uint64_t c = counter_++;
  return mix64(mix64(c ^ key_) + (key_ >> 1));
}

double CounterRng::uniform() noexcept {
  // 53 random mantissa bits, shifted by half an ulp to avoid 0.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

CounterRng CounterRng::substream(std::uint64_t id) const noexcept {
  return CounterRng(derive_seed(key_, id));
}

}  // namespace ahakv
