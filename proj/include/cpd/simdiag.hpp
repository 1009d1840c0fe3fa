// SPDX-License-Identifier: MIT
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

// Jennrich-style decomposition through two random slice mixes M_x = T(I,I,x)
// and M_y = T(I,I,y). Mode-1 components are eigenvectors of M_x M_y^+, mode-2
// components eigenvectors of M_y^T (M_x^+)^T, matched by their eigenvalue
// products being 1; the mode-3 factor solves the remaining least squares
// problem. Works whenever the first two factors have full column rank and no
// two mode-3 components are parallel; d3 may be as small as 2.
//
// Degenerate draws (eigenvalue collisions, genuinely complex eigenvalues,
// slice rank below k) trigger up to three redraws of (x, y) before failing
// with numerical_error.
[[nodiscard]] KruskalForm simdiag(const DenseTensor& t, std::size_t k, std::uint64_t seed);

// Rank read off the numerical rank of the first slice mix.
[[nodiscard]] KruskalForm simdiag(const DenseTensor& t, std::uint64_t seed);

namespace detail {

struct ComplexEig {
  std::vector<std::complex<double>> values;
  std::vector<std::vector<std::complex<double>>> vectors;  // unit norm, aligned with values
};

// Dense non-symmetric eigensolver: Householder reduction to Hessenberg form,
// explicit shifted QR with Wilkinson shifts and Givens rotations to a complex
// Schur form, eigenvectors by triangular back-substitution. Results sorted by
// descending real part, then imaginary part.
[[nodiscard]] ComplexEig nonsymmetric_eig(const Matrix& a);

}  // namespace detail
}  // namespace cpd
