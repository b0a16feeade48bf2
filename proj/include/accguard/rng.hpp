#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace accguard {

// splitmix64; used to derive independent stream seeds from (base, salt...).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

template <typename... Salts>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt, Salts... rest) {
  return derive_seed(splitmix64(base ^ splitmix64(salt)), rest...);
}

// Deterministic random stream. Gaussian draws use Box-Muller over two raw
// engine outputs so the sequence does not depend on the standard library's
// normal_distribution internals (which cache state and vary by vendor).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Exactly two engine outputs per call; std = 0 returns the mean.
  double gaussian(double mean, double std) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    return mean + std * z;
  }

  // Unbiased-enough index draw via 128-bit multiply; deterministic everywhere.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace accguard
