// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/power.hpp"
#include "cpd/report.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

// Rank-k eigenstructure of a second-moment matrix, kept around so whitened
// components can be mapped back. gamma is signed and sorted by |gamma|
// descending; w = u * diag(|gamma|^{-1/2}).
struct WhiteningContext {
  Matrix u;                             // d x k
  std::vector<double> gamma;            // length k
  Matrix w;                             // d x k
  std::vector<double> assumed_weights;  // default all 1
  std::size_t k = 0;
};

struct SymmetrizationContext {
  WhiteningContext a, b, c;
  Matrix r_ab, r_ac;  // k x k cross-rotation maps
  bool mbc_supplied = false;  // accepted but unused input, surfaced to reports
};

struct ModeTriple {
  std::vector<double> a, b, c;
};

// M = T(I, I, theta).
[[nodiscard]] Matrix slice_contract(const DenseTensor& t, const std::vector<double>& theta);

// T_w = T(W, W, W) with W built from the top-k eigenpairs of m by
// magnitude. Shared components Sum lambda_j a^{x3} / Sum lt_j a a^T come out
// orthogonal with weights lambda_j * lt_j^{-3/2}.
[[nodiscard]] std::pair<DenseTensor, WhiteningContext> whiten(const DenseTensor& t, const Matrix& m,
                                                              std::size_t k);

// a = lt^{-1/2} * U * diag(|gamma|^{1/2}) * v.
[[nodiscard]] std::vector<double> unwhiten(const WhiteningContext& ctx,
                                           const std::vector<double>& v, double lambda_tilde);

// T_sym = T(W_a, W_b R_ab^T, W_c R_ac^T) with R_ab = W_a^T M_ab W_b and
// R_ac = W_a^T M_ac W_c. m_bc is accepted for interface parity but takes no
// part in the computation; passing it sets ctx.mbc_supplied.
[[nodiscard]] std::pair<DenseTensor, SymmetrizationContext> symmetrize(
    const DenseTensor& t, const Matrix& ma, const Matrix& mb, const Matrix& mc, const Matrix& mab,
    const Matrix& mac, std::size_t k, const Matrix* m_bc = nullptr);

// Inverts whitening + symmetrization for one recovered component:
//   a = lt_a^{-1/2}          U_a diag(|g_a|^{1/2}) ahat
//   b = (lt_a^{1/2}/lt_ab)   U_b diag(|g_b|^{1/2}) R_ab^T ahat
//   c = (lt_a^{1/2}/lt_ac)   U_c diag(|g_c|^{1/2}) R_ac^T ahat
[[nodiscard]] ModeTriple unsymmetrize(const SymmetrizationContext& ctx,
                                      const std::vector<double>& ahat, double lt_a = 1.0,
                                      double lt_ab = 1.0, double lt_ac = 1.0);

// whiten -> decompose_orthogonal -> unwhiten with assumed weights 1.
// The result's unit factors and weights are consistent with the inputs:
// reconstructing from them reproduces T, and the report carries the
// scale-invariant pairs (per-component scale |ahat_j| and weight) plus
// sigma_min(M) and the weight extremes.
[[nodiscard]] std::pair<KruskalForm, DecompositionReport> decompose_nonorthogonal(
    const DenseTensor& t, const Matrix& m, std::size_t k, const PowerConfig& cfg);

}  // namespace cpd
