#pragma once

#include <cstdint>
#include <random>

namespace chw {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of stream `index` under `master`. Fixed mix, so results never depend on
// how streams are scheduled across workers.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with a platform-independent mapping to [0,1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n > 0. Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    for (;;) {
      const unsigned __int128 prod = static_cast<unsigned __int128>(engine_()) * n;
      const auto low = static_cast<std::uint64_t>(prod);
      if (low >= (-n) % n) return static_cast<std::uint64_t>(prod >> 64);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace chw
