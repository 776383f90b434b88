#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace mstr {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256++ engine with key-derived substreams.
///
/// A stream is identified by its seed.  derive() maps (seed, key...) to a new
/// seed without touching the parent's state, so work split across threads can
/// draw from per-item streams and stay bit-identical whatever the schedule.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  std::uint64_t seed() const { return seed_; }

  RngStream derive(std::initializer_list<std::uint64_t> keys) const {
    std::uint64_t h = seed_ ^ 0x6A09E667F3BCC909ULL;
    for (std::uint64_t k : keys) {
      std::uint64_t sm = h ^ (k + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
      h = detail::splitmix64(sm);
    }
    return RngStream(h);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace mstr
