// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/matrix.hpp"
#include "cpd/report.hpp"
#include "cpd/rng.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

struct PowerConfig {
  std::size_t restarts = 0;    // 0 = default 10*k*(ceil(ln k) + 1)
  std::size_t iterations = 100;
  std::size_t deflation_rounds = 0;  // 0 = take the rank argument
  double tol = 1e-12;          // early stop on ||theta_t - theta_{t-1}||
  std::uint64_t seed = 0;
};

struct EigenPair {
  double eigenvalue = 0.0;
  std::vector<double> eigenvector;
};

[[nodiscard]] std::size_t default_restarts(std::size_t k);

// One step of the map theta -> T(I,theta,theta)/||.||.
// Throws numerical_error on a zero image.
[[nodiscard]] std::vector<double> power_step(const DenseTensor& t, const std::vector<double>& theta);

[[nodiscard]] EigenPair extract_eigenpair(const DenseTensor& t, const PowerConfig& cfg);

// T - lambda * theta^{x3}. The rank-1 entry is evaluated as
// ((lambda*t_i)*t_j)*t_l so implicit sample-based paths can subtract the
// same term bit for bit.
[[nodiscard]] DenseTensor deflate(const DenseTensor& t, const EigenPair& pair);

// k rounds of extract + deflate. Weights are made positive by flipping the
// vector (odd order). Restart r of round s draws from stream (seed, s, r).
[[nodiscard]] std::pair<KruskalForm, DecompositionReport> decompose_orthogonal(
    const DenseTensor& t, std::size_t k, const PowerConfig& cfg);

namespace detail {

void validate_power_config(std::size_t restarts, std::size_t iterations, double tol);

// Core single-round engine shared by the dense and the sample-implicit
// paths. Oracle::apply(theta) must return T(I,theta,theta) for the current
// deflated tensor; every arithmetic step below is shared so that two
// oracles producing identical images yield bitwise identical results.
template <typename Oracle>
EigenPair extract_round(const Oracle& oracle, std::size_t dim, std::size_t restarts,
                        std::size_t iterations, double tol, std::uint64_t seed, std::size_t round,
                        std::size_t* iterations_used, std::size_t* chosen_restart) {
  std::size_t iters_total = 0;
  std::vector<double> best_theta;
  double best_value = 0.0;
  bool any_valid = false;
  std::size_t best_restart = 0;

  auto iterate = [&](std::vector<double>& theta, std::size_t count) -> bool {
    for (std::size_t it = 0; it < count; ++it) {
      std::vector<double> image = oracle.apply(theta);
      const double nrm = norm2(image);
      if (nrm == 0.0) return it > 0;
      for (auto& x : image) x /= nrm;
      double delta = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = image[i] - theta[i];
        delta += d * d;
      }
      theta = std::move(image);
      ++iters_total;
      if (std::sqrt(delta) < tol) return true;
    }
    return true;
  };

  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, round, r);
    std::vector<double> theta = rng.unit_sphere(dim);
    if (!iterate(theta, iterations)) continue;  // degenerate start
    const double value = dot(theta, oracle.apply(theta));
    if (!any_valid || value > best_value) {
      any_valid = true;
      best_value = value;
      best_theta = theta;
      best_restart = r;
    }
  }
  if (!any_valid) throw numerical_error("power: all restarts degenerate");

  iterate(best_theta, iterations);  // polish
  const double lambda = dot(best_theta, oracle.apply(best_theta));
  if (iterations_used) *iterations_used += iters_total;
  if (chosen_restart) *chosen_restart = best_restart;
  return EigenPair{lambda, std::move(best_theta)};
}

// Positive-weight convention; exact IEEE negations keep deflation bitwise
// stable under the flip.
inline void fold_sign(EigenPair& pair) {
  if (pair.eigenvalue < 0.0) {
    pair.eigenvalue = -pair.eigenvalue;
    for (auto& x : pair.eigenvector) x = -x;
  }
}

}  // namespace detail

}  // namespace cpd
