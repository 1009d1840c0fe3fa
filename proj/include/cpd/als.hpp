// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/report.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

enum class SymmetricHeuristic { none, lag_two, lag_one };

struct AlsConfig {
  std::size_t rank = 1;
  double l2_reg = 0.0;  // ridge term inside the inverted Gram
  std::size_t max_iters = 200;
  double tol = 1e-10;  // stop when the sweep error changes less than this
  std::uint64_t seed = 0;
  SymmetricHeuristic symmetric_heuristic = SymmetricHeuristic::none;
};

// Alternating least squares for asymmetric order-3 tensors. Factors start
// i.i.d. uniform [0,1); each sweep solves the three mode-wise least squares
// problems through the Hadamard-of-Grams identity, keeps unit columns, and
// logs the relative reconstruction error. With l2_reg = 0 the error is
// non-increasing per sweep up to roundoff; a run that still rises five sweeps
// in a row restarts from a fresh seed (at most three restarts) and the best
// iterate seen is returned if every attempt diverges.
[[nodiscard]] std::pair<KruskalForm, DecompositionReport> als(const DenseTensor& t,
                                                              const AlsConfig& cfg);

// Symmetric variant fitting a single factor. lag_two feeds the previous two
// iterates into the update; lag_one feeds the previous iterate twice. No
// monotonicity holds for either heuristic.
[[nodiscard]] KruskalForm als_symmetric(const DenseTensor& t, const AlsConfig& cfg);

namespace detail {

// unfolded * (fb khatri-rao fc) * (fb'fb hadamard fc'fc + alpha I)^{-1},
// returned as unit columns plus their norms. Throws numerical_error on a
// numerically singular Gram when alpha is zero.
[[nodiscard]] std::pair<Matrix, std::vector<double>> mode_update(const Matrix& unfolded,
                                                                 const Matrix& fb,
                                                                 const Matrix& fc, double alpha);

// Restart signal after five consecutive error increases.
struct DivergenceTracker {
  int rises = 0;
  bool feed(double prev, double cur) {
    rises = (cur > prev) ? rises + 1 : 0;
    return rises >= 5;
  }
};

}  // namespace detail
}  // namespace cpd
