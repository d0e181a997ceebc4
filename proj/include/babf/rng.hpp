#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace babf {

// SplitMix64 step (Vigna, public domain). Used only to derive seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ engine. Cheap to construct, so independent substreams can be
/// derived per unit of work (chain, sweep, curve) without carrying state.
class RngStream {
 public:
  using result_type = std::uint64_t;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  explicit RngStream(std::uint64_t seed = 0) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  /// Derive a deterministic substream from a seed and a key path,
  /// e.g. keyed(seed, {chain, sweep, curve_id}).
  static RngStream keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = seed;
    for (std::uint64_t id : path) {
      h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      std::uint64_t t = h;
      h = splitmix64_next(t);
    }
    return RngStream(h);
  }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

inline double draw_uniform(RngStream& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline double draw_normal(RngStream& g) {
  std::normal_distribution<double> d;
  return d(g);
}

/// Gamma(shape, rate) draw; mean shape/rate.
inline double draw_gamma(RngStream& g, double shape, double rate) {
  std::gamma_distribution<double> d(shape, 1.0 / rate);
  return d(g);
}

/// Inverse-gamma(shape, rate) draw; mean rate/(shape-1) for shape > 1.
inline double draw_inverse_gamma(RngStream& g, double shape, double rate) {
  return 1.0 / std::gamma_distribution<double>(shape, 1.0 / rate)(g);
}

inline double draw_chi_squared(RngStream& g, double dof) {
  return std::chi_squared_distribution<double>(dof)(g);
}

}  // namespace babf
