#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include "kmn/types.hpp"

namespace kmn {

// Deterministic random source. Everything stochastic in the toolkit flows
// from one master seed through Rng::derive(master, purpose, index), which
// hashes the purpose string and index into an independent stream. That keeps
// runs reproducible across platforms and makes per-trial simulation order
// independent: trial k always sees the same stream no matter how the trials
// are scheduled.
//
// Core generator is xoshiro256++ seeded via splitmix64. The samplers below
// are hand-rolled on purpose: std::normal_distribution and friends are
// allowed to differ between standard library implementations, which would
// break the byte-identical-rerun contract if anyone builds this elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the 256-bit state; this is the
    // initialization recommended by the xoshiro authors.
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  static std::uint64_t hash_purpose(std::string_view purpose) {
    // FNV-1a, stable across platforms.
    std::uint64_t h = 1469598103934665603ull;
    for (char c : purpose) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  // Independent stream keyed by (master, purpose, index).
  static Rng derive(std::uint64_t master, std::string_view purpose,
                    std::uint64_t index = 0) {
    std::uint64_t x = master;
    std::uint64_t a = splitmix64(x);
    x ^= hash_purpose(purpose);
    std::uint64_t b = splitmix64(x);
    x ^= index * 0x9e3779b97f4a7c15ull;
    std::uint64_t c = splitmix64(x);
    return Rng(a ^ (b * 0x2545f4914f6cdd1dull) ^ c);
  }

  std::uint64_t next_u64() {
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

  // Uniform in [0, 1) with 53 random bits.
  Scalar uniform() {
    return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) without modulo bias (Lemire's method).
  std::uint64_t uniform_index(std::uint64_t n) {
    while (true) {
      std::uint64_t x = next_u64();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // Angle uniform on (-pi, pi]; u = 0 gives +pi, the u -> 1 limit is
  // excluded, matching the wrap_angle convention.
  Scalar uniform_angle() { return kPi - kTwoPi * uniform(); }

  // Standard normal via Box-Muller; the spare coordinate is cached.
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - u lies in (0, 1], so the log is finite.
    Scalar u1 = 1.0 - uniform();
    Scalar u2 = uniform();
    Scalar r = std::sqrt(-2.0 * std::log(u1));
    Scalar a = kTwoPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Scalar normal(Scalar mean, Scalar sd) { return mean + sd * normal(); }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze; the shape < 1 case is boosted
  // from shape + 1 in the usual way.
  Scalar gamma(Scalar shape) {
    if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
    if (shape < 1.0) {
      Scalar u = 1.0 - uniform();  // (0, 1]
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const Scalar d = shape - 1.0 / 3.0;
    const Scalar c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      Scalar x = normal();
      Scalar t = 1.0 + c * x;
      if (t <= 0.0) continue;
      Scalar v = t * t * t;
      Scalar u = 1.0 - uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  Scalar chi_squared(Scalar df) { return 2.0 * gamma(0.5 * df); }

  // Student t via N(0,1) / sqrt(chi2_df / df).
  Scalar student_t(Scalar df) {
    if (!(df > 0.0)) throw ValidationError("student_t df must be positive");
    return normal() / std::sqrt(chi_squared(df) / df);
  }

  // Von Mises draw with mean 0 and concentration kappa, in (-pi, pi].
  // Best-Fisher (1979) wrapped-Cauchy envelope rejection; acceptance stays
  // around two thirds for every kappa.
  Scalar von_mises(Scalar kappa) {
    if (!(kappa > 0.0))
      throw ValidationError("von_mises kappa must be positive");
    if (kappa < 1e-8) return uniform_angle();
    const Scalar tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const Scalar rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const Scalar r = (1.0 + rho * rho) / (2.0 * rho);
    while (true) {
      Scalar z = std::cos(kPi * uniform());
      Scalar f = (1.0 + r * z) / (r + z);
      Scalar c = kappa * (r - f);
      Scalar u2 = 1.0 - uniform();  // (0, 1]
      if (c * (2.0 - c) - u2 > 0.0 ||
          std::log(c / u2) + 1.0 - c >= 0.0) {
        Scalar angle = std::acos(f);
        return wrap_angle(uniform() < 0.5 ? -angle : angle);
      }
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
  bool has_spare_ = false;
  Scalar spare_ = 0.0;
};

}  // namespace kmn
