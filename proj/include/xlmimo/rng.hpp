// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number generation.
//
// All randomness in the project flows through this header so that every
// artifact (dataset, model initialization, training schedule) is a pure
// function of a 64-bit seed.  The engine is std::mt19937_64, whose output
// sequence is pinned by the C++ standard, and all value mappings
// (uniform, normal, complex normal) are written out explicitly instead of
// using std::*_distribution, whose algorithms are implementation-defined.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "xlmimo/common.hpp"

namespace xlm {

// splitmix64 finalizer: bijective 64-bit mixer with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed of the i-th sample stream of a dataset.  Index 0 of the underlying
// splitmix64 sequence is reserved for dataset-level draws (the combiner),
// samples use positions 1, 2, ...
inline std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + index * 0x9E3779B97F4A7C15ULL);
}

// Independent named stream derived from an existing seed.  Used e.g. to
// re-draw evaluation noise at several SNR points without perturbing the
// draws that produced the stored sample.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [lo, hi], both inclusive.  Spans used here are tiny
  // (tens at most), so plain modulo reduction is bias-free in practice
  // (bias < 2^-58).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(eng_() % span);
  }

  // Standard normal via Box-Muller; consumes exactly two engine draws.
  double normal() {
    const double u1 = u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(kTwoPi * u2);
  }

  // Circularly symmetric complex normal CN(0, 1): real and imaginary parts
  // are independent N(0, 1/2).  Consumes exactly two engine draws.
  cdouble cnormal() {
    const double u1 = u01();
    const double u2 = u01();
    const double r = std::sqrt(-std::log1p(-u1));  // E[r^2] = 1
    return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace xlm
