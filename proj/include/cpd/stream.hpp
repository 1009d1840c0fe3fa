// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/power.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

/// A batch of n three-view samples, one sample per row in each view. The
/// empirical moment tensor of the batch is (1/n) sum x1 (x) x2 (x) x3, but
/// most operations here avoid materializing it.
struct TripleSampleBatch {
  Matrix x1, x2, x3;
  [[nodiscard]] std::size_t count() const { return x1.rows; }
};

/// One three-view sample, the unit of the stochastic gradient.
struct TripleSample {
  std::vector<double> x1, x2, x3;
};

/// Allocation accounting for the sample-implicit decomposition path.
/// Counts doubles, not bytes; covers the oracle scratch buffers and the
/// recorded deflation pairs, which dominate auxiliary storage.
struct MemoryAccounting {
  std::size_t current_doubles = 0;
  std::size_t peak_doubles = 0;
  void on_alloc(std::size_t n) {
    current_doubles += n;
    if (current_doubles > peak_doubles) peak_doubles = current_doubles;
  }
  void on_free(std::size_t n) { current_doubles -= n; }
};

/// Validated constructors. Views must agree on the sample count; n >= 1.
[[nodiscard]] TripleSampleBatch make_batch(Matrix x1, Matrix x2, Matrix x3);
/// Symmetric-view batch: the same matrix serves as all three views.
[[nodiscard]] TripleSampleBatch make_batch(Matrix x);

/// Adapter for batches stored as order-2 tensors (n x d, one row per sample).
[[nodiscard]] Matrix view_matrix(const DenseTensor& t);

[[nodiscard]] TripleSample sample_at(const TripleSampleBatch& batch, std::size_t i);

/// (1/n) sum over samples of x1 (x) x2 (x) x3. Each entry is a fixed-order
/// pairwise-tree sum over samples, so the result is independent of chunking
/// and bit-reproducible.
[[nodiscard]] DenseTensor empirical_tensor(const TripleSampleBatch& batch);

/// T_hat(u, v, I) = (1/n) sum <x1,u><x2,v> x3 without materializing the
/// tensor: two inner products per sample, O(n d) total.
[[nodiscard]] std::vector<double> implicit_apply(const TripleSampleBatch& batch,
                                                 const std::vector<double>& u,
                                                 const std::vector<double>& v);

/// Deflated power decomposition driven directly by the sample batch.
/// Bitwise identical to decompose_orthogonal(empirical_tensor(batch), k, cfg)
/// at the same seed; never allocates a d^3 array. Requires symmetric views
/// (identical matrices) or a batch whose empirical tensor is symmetric.
[[nodiscard]] KruskalForm online_power_decompose(const TripleSampleBatch& batch, std::size_t k,
                                                 const PowerConfig& cfg,
                                                 MemoryAccounting* acct = nullptr);

/// d/dC_t of f(C, x) = ||sum_j lambda_j a_j (x) b_j (x) c_j - x1 (x) x2 (x) x3||_F^2,
/// column-wise:
///   2 lambda_t sum_j lambda_j <a_j,a_t><b_j,b_t> c_j - 2 lambda_t <x1,a_t><x2,b_t> x3.
/// Theta(k^2 d) per sample; `flops` (optional) receives the multiply-add count.
[[nodiscard]] Matrix stochastic_als_gradient(const Matrix& c, const TripleSample& sample,
                                             const Matrix& a, const Matrix& b,
                                             const std::vector<double>& lambda,
                                             std::size_t* flops = nullptr);

namespace detail {

/// Fixed-order pairwise reduction of f(lo) + ... + f(hi-1): linear below 32
/// terms, otherwise split at the midpoint. The shape of the tree depends
/// only on (lo, hi), which is what makes per-entry sums reproducible.
template <typename F>
double pairwise_sum(const F& f, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 32) {
    double acc = 0.0;
    for (std::size_t s = lo; s < hi; ++s) acc += f(s);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(f, lo, mid) + pairwise_sum(f, mid, hi);
}

}  // namespace detail

}  // namespace cpd
