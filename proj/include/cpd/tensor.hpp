// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

/// Dense tensor of order dims.size(); flat storage with the LAST index varying
/// fastest. All entries are 64-bit floats. Immutable-after-construction use is
/// the expected pattern; every operation below returns fresh storage.
struct DenseTensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;

  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape);

  [[nodiscard]] std::size_t order() const { return dims.size(); }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  /// Flat offset of a multi-index; bijective with get/set round-trip identity.
  [[nodiscard]] std::size_t offset(std::span<const std::size_t> idx) const;

  [[nodiscard]] double at(std::initializer_list<std::size_t> idx) const;
  double& at(std::initializer_list<std::size_t> idx);

  // order-3 accessors
  double operator()(std::size_t i, std::size_t j, std::size_t l) const {
    return data[(i * dims[1] + j) * dims[2] + l];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t l) {
    return data[(i * dims[1] + j) * dims[2] + l];
  }
};

/// Rank-k sum of rank-1 terms: weights λ_j and one factor matrix per mode,
/// each dims[t] x k with unit columns (zero columns only for declared dead
/// components). Symmetric forms carry equal factors in every mode.
struct KruskalForm {
  std::vector<double> weights;
  std::vector<Matrix> factors;

  [[nodiscard]] std::size_t rank() const { return weights.size(); }
  [[nodiscard]] std::size_t order() const { return factors.size(); }
};

/// weight * v₁⊗…⊗v_p.
[[nodiscard]] DenseTensor outer_rank1(double weight, const std::vector<std::vector<double>>& vectors);

/// Mode-m matricization: shape dims[m] x ∏ other dims, columns ordered by the
/// remaining indices in original order with the last one fastest. Returns a
/// copy, never a view.
[[nodiscard]] Matrix unfold(const DenseTensor& t, std::size_t mode);

/// Exact inverse of unfold for the given mode and shape.
[[nodiscard]] DenseTensor fold(const Matrix& m, std::size_t mode, const std::vector<std::size_t>& shape);

/// Multilinear form T(A,B,C) for order-3 T; output shape (cols A, cols B, cols C).
[[nodiscard]] DenseTensor multilinear(const DenseTensor& t, const Matrix& a, const Matrix& b, const Matrix& c);

/// T(u,v,w).
[[nodiscard]] double apply(const DenseTensor& t, const std::vector<double>& u, const std::vector<double>& v,
                           const std::vector<double>& w);

/// T(I,v,w) = Σ_{j,l} v_j w_l T(:,j,l).
///
/// Evaluation order is pinned: the weight grid v_j*w_l is materialized first,
/// then each output entry accumulates over (j,l) row-major in a single linear
/// pass. Implicit sample-based evaluations reproduce this order bit for bit.
[[nodiscard]] std::vector<double> apply(const DenseTensor& t, const std::vector<double>& v,
                                        const std::vector<double>& w);

/// T(I,I,w) = Σ_l w_l T(:,:,l).
[[nodiscard]] Matrix apply(const DenseTensor& t, const std::vector<double>& w);

/// Contract the last mode with v: out has order()-1, entries Σ_l T[..,l] v_l.
[[nodiscard]] DenseTensor contract_last_mode(const DenseTensor& t, const std::vector<double>& v);

[[nodiscard]] double frobenius_norm(const DenseTensor& t);

/// Heuristic lower bound on the spectral norm sup |T(u,v,w)| over unit u,v,w:
/// best value over seeded restarts of alternating rank-1 power updates.
/// Monotone nondecreasing in `restarts`; exact for rank-1 inputs.
[[nodiscard]] double spectral_norm_estimate(const DenseTensor& t, std::size_t restarts = 20,
                                            std::size_t iters = 100, std::uint64_t seed = 0,
                                            double tol = 1e-12);

/// Σ_j λ_j a_j⊗b_j⊗… for any order ≥ 2. Linear in the weights.
[[nodiscard]] DenseTensor kruskal_to_tensor(const KruskalForm& k);

/// max |T[idx] - T[perm(idx)]| over all index permutations, as a fraction of
/// max |T|; zero for exactly symmetric cubical tensors.
[[nodiscard]] double symmetry_defect(const DenseTensor& t);

}  // namespace cpd
