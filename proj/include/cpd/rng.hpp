// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpd/errors.hpp"

namespace cpd {

/// Counter-based pseudo random generator (splitmix64 core).
///
/// Sub-streams are addressed as (seed, a, b) so independent parts of an
/// algorithm (deflation round, restart index) can draw reproducibly without
/// sharing state. Identical (seed, a, b) always yields the identical sequence
/// on a given build; nothing here depends on global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Derived stream for (seed, a, b). Distinct tuples give decorrelated streams.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = seed;
    h = mix(h ^ (0x9E3779B97F4A7C15ULL * (a + 1)));
    h = mix(h ^ (0xC2B2AE3D27D4EB4FULL * (b + 1)));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    cached_ = r * std::sin(two_pi * u2);
    have_cached_ = true;
    return r * std::cos(two_pi * u2);
  }

  std::vector<double> gaussian_vec(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = gaussian();
    return v;
  }

  /// Uniform point on the unit sphere in R^d (normalized Gaussian draw).
  std::vector<double> unit_sphere(std::size_t d) {
    for (;;) {
      std::vector<double> v = gaussian_vec(d);
      double s = 0.0;
      for (double x : v) s += x * x;
      if (s > 0.0) {
        const double inv = 1.0 / std::sqrt(s);
        for (auto& x : v) x *= inv;
        return v;
      }
    }
  }

  /// Inverse-CDF draw from a categorical distribution.
  /// `probs` must be nonnegative; it is normalized internally. Prefix sums are
  /// Kahan-compensated so long tails keep their mass.
  std::size_t categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw validation_error("categorical: empty distribution");
    double total = 0.0, comp = 0.0;
    for (double p : probs) {
      const double y = p - comp;
      const double t = total + y;
      comp = (t - total) - y;
      total = t;
    }
    if (!(total > 0.0)) throw validation_error("categorical: zero mass");
    const double u = uniform01() * total;
    double acc = 0.0;
    comp = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      const double y = probs[i] - comp;
      const double t = acc + y;
      comp = (t - acc) - y;
      acc = t;
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  /// Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 boosted through
  /// the Gamma(alpha+1) identity.
  double gamma(double alpha) {
    if (!(alpha > 0.0)) throw validation_error("gamma: alpha must be positive");
    if (alpha < 1.0) {
      const double g = gamma(alpha + 1.0);
      double u = uniform01();
      if (u <= 0.0) u = 0x1.0p-53;
      return g * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform01();
      if (u <= 0.0) u = 0x1.0p-53;
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::vector<double> dirichlet(const std::vector<double>& alpha) {
    std::vector<double> h(alpha.size());
    double s = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      h[j] = gamma(alpha[j]);
      s += h[j];
    }
    if (s <= 0.0) s = 1.0;
    for (auto& x : h) x /= s;
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace cpd
