// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/power.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

/// All 2x2 minors of a symmetric matrix, one value per canonical 4-tuple
/// (i1,i2,j1,j2) with i1 < i2, j1 < j2, (i1,i2) <= (j1,j2) lexicographically.
/// The vector is identically zero iff the input has rank at most one.
struct Rank1DetectorOutput {
  std::vector<double> values;
  std::vector<std::array<std::size_t, 4>> tuples;
};

/// Canonical 4-tuple enumeration for dimension d, lexicographic in
/// ((i1,i2),(j1,j2)). Length equals detector_dimension(d).
[[nodiscard]] std::vector<std::array<std::size_t, 4>> detector_tuples(std::size_t d);

/// C(C(d,2)+1, 2): the number of structurally distinct 2x2 minors of a
/// symmetric d x d matrix.
[[nodiscard]] std::size_t detector_dimension(std::size_t d);

[[nodiscard]] Rank1DetectorOutput rank1_detector(const Matrix& a);

/// d x d matrix view of a d^2 vector, entry (i,j) = u[i*d + j]. Inverse of
/// the column-wise Kronecker square: matricize_square(a k-r a) = a a^T.
[[nodiscard]] Matrix matricize_square(const std::vector<double>& u);

/// Coordinates of x (x) x in the paired basis of symmetric m x m matrices:
/// one entry per p <= q, value x_p*x_q, ordered (0,0),(0,1),..,(1,1),..
[[nodiscard]] std::vector<double> lifted_square(const std::vector<double>& x);

/// Detector matrix Z of the map x -> rank1_detector(matricize_square(P x)):
/// detector_dimension(d) rows, C(m+1,2) columns over the paired basis, so
/// matvec(Z, lifted_square(x)) equals the detector applied to mat(P x).
/// Columns of P must matricize to symmetric matrices for the identity to be
/// exact; that holds whenever P spans a set of symmetric outer products.
[[nodiscard]] Matrix linearized_detector_matrix(const Matrix& p);

/// Fourth-order decomposition T = sum_j w_j a_j^(x4) with positive weights
/// and possibly more components than the dimension. Flattens T to the d^2
/// square matrix of pairwise slices, finds the component span by eigenvalue
/// decomposition, locates the rank-1 directions inside the span through the
/// null space of the linearized detector, splits them by simultaneous
/// diagonalization of two random null-space combinations, and reads each
/// component off the top eigenpair of its matricized vector.
///
/// Fails with numerical_error when the flattening has fewer than k strong
/// positive directions, when the detector null space does not have dimension
/// exactly k, when eigenvalue collisions persist after three redraws, or when
/// a recovered vector matricizes far from rank one (second singular value
/// above a tenth of the first). Components are returned sorted by weight,
/// factors repeated over all four modes.
[[nodiscard]] KruskalForm foobi(const DenseTensor& t, std::size_t k, std::uint64_t seed);

/// Decomposition of a symmetric order-6 or order-5 tensor with rank up to
/// C(d+1,2), by reshaping modes in pairs to a third-order tensor over R^{d^2}
/// whose components are the Kronecker squares a_j (x) a_j. The order-6 path
/// whitens the reshaped tensor with one of its own slice matrices and runs
/// the power method; the order-5 path keeps the last mode at dimension d and
/// uses slice diagonalization. Each recovered d^2 component is matricized
/// and replaced by its top eigenvector; a second singular value above a tenth
/// of the first fails loudly. cfg drives the inner power method (the order-5
/// path uses only cfg.seed).
[[nodiscard]] KruskalForm tensorize_decompose(const DenseTensor& t, std::size_t k,
                                              const PowerConfig& cfg = PowerConfig{});

/// Order-4 lift of a cubical order-3 tensor:
///   out[i1,i2,i3,i4] = sum_i T[i,i1,i2] * T[i,i3,i4],
/// so out(x,x,x,x) = ||T(:,x,x)||^2. Maps a^(x3) to ||a||^2 a^(x4).
[[nodiscard]] DenseTensor lift_third_order(const DenseTensor& t);

}  // namespace cpd
