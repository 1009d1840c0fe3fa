// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

struct SvdResult {
  Matrix u;                            // n x r, orthonormal columns
  std::vector<double> singular_values; // length r, descending, nonnegative
  Matrix v;                            // m x r, orthonormal columns
};

struct SymEigResult {
  std::vector<double> values;  // descending (algebraic)
  Matrix vectors;              // columns are eigenvectors
};

struct CcaResult {
  Matrix directions_x;               // columns u_j in original x coordinates
  Matrix directions_y;               // columns v_j in original y coordinates
  std::vector<double> correlations;  // descending
};

// Cyclic Jacobi on a symmetric matrix. Sweep cap 100, off-diagonal
// tolerance 1e-12 * ||A||_F. Throws numerical_error past the cap.
[[nodiscard]] SymEigResult symmetric_eig(const Matrix& a);

// Full SVD with r = min(n, m). Runs Jacobi on the Gram matrix of the
// thinner side, then one modified Gram-Schmidt pass on the derived side
// and recomputes each sigma as u^T M v. The largest-magnitude entry of
// every left singular vector is forced nonnegative.
[[nodiscard]] SvdResult svd(const Matrix& m);

[[nodiscard]] SvdResult truncated_svd(const Matrix& m, std::size_t k);

[[nodiscard]] Matrix low_rank_approx(const Matrix& m, std::size_t k);

// Numerical rank: count of sigma_j > max(n,m) * 2.2e-16 * sigma_1,
// or > threshold when a nonnegative override is given.
[[nodiscard]] std::size_t numerical_rank(const SvdResult& s, std::size_t n, std::size_t m,
                                         double threshold = -1.0);

[[nodiscard]] Matrix pseudo_inverse(const Matrix& m, double threshold = -1.0);

// Pseudo-inverse restricted to the top-k singular triplets.
[[nodiscard]] Matrix pseudo_inverse_rank(const Matrix& m, std::size_t k);

// Rows of data are samples. Returns the rank-k projector P onto the top
// principal subspace of the 1/n covariance and the offset (I - P) * mean.
[[nodiscard]] std::pair<Matrix, std::vector<double>> pca(const Matrix& data, std::size_t k);

// W = U_k diag(|gamma|^{-1/2}) over the k eigenvalues of largest magnitude,
// so W^T M W = diag(sign gamma). Throws numerical_error when the k-th
// eigenvalue magnitude falls below the numerical-rank cutoff.
[[nodiscard]] Matrix whitening_matrix(const Matrix& m, std::size_t k);

// Canonical correlations of paired rows of x and y, using uncentered
// second moments X^T X / n. Covariances must be numerically full rank.
[[nodiscard]] CcaResult cca(const Matrix& x, const Matrix& y);

}  // namespace cpd
