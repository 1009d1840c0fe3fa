// SPDX-License-Identifier: MIT
#include "cpd/whiten.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/svd.hpp"

namespace cpd {
namespace {

constexpr double kEps = 2.2e-16;

// Top-k eigenpairs of m by magnitude, signed values kept. Throws when the
// k-th magnitude falls below the numerical-rank cutoff: a rank-deficient
// second moment cannot whiten k components.
WhiteningContext build_context(const Matrix& m, std::size_t k, const std::string& label) {
  if (m.rows != m.cols) {
    throw validation_error("whiten: " + label + " must be square");
  }
  if (k == 0 || k > m.rows) {
    throw validation_error("whiten: target rank must lie in [1, dim]");
  }
  SymEigResult eig = symmetric_eig(m);
  const std::size_t d = m.rows;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(eig.values[x]) > std::fabs(eig.values[y]);
  });
  const double cutoff = static_cast<double>(d) * kEps * std::fabs(eig.values[order[0]]);

  WhiteningContext ctx;
  ctx.k = k;
  ctx.u = Matrix(d, k);
  ctx.w = Matrix(d, k);
  ctx.gamma.resize(k);
  ctx.assumed_weights.assign(k, 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double g = eig.values[order[j]];
    if (std::fabs(g) <= cutoff) {
      throw numerical_error("whiten: " + label + " has numerical rank below the requested " +
                            std::to_string(k));
    }
    ctx.gamma[j] = g;
    const double inv_root = 1.0 / std::sqrt(std::fabs(g));
    for (std::size_t i = 0; i < d; ++i) {
      const double uij = eig.vectors(i, order[j]);
      ctx.u(i, j) = uij;
      ctx.w(i, j) = uij * inv_root;
    }
  }
  return ctx;
}

// u * diag(|gamma|^{1/2}) * v, scaled.
std::vector<double> lift(const Matrix& u, const std::vector<double>& gamma,
                         const std::vector<double>& v, double scale) {
  std::vector<double> stretched(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    stretched[j] = v[j] * std::sqrt(std::fabs(gamma[j]));
  }
  std::vector<double> out = matvec(u, stretched);
  for (double& x : out) x *= scale;
  return out;
}

void require_order3(const DenseTensor& t, const char* who) {
  if (t.order() != 3) {
    throw validation_error(std::string(who) + ": tensor must have order 3");
  }
}

}  // namespace

Matrix slice_contract(const DenseTensor& t, const std::vector<double>& theta) {
  require_order3(t, "slice_contract");
  if (theta.size() != t.dims[2]) {
    throw validation_error("slice_contract: probe length must match the last mode");
  }
  return cpd::apply(t, theta);
}

std::pair<DenseTensor, WhiteningContext> whiten(const DenseTensor& t, const Matrix& m,
                                                std::size_t k) {
  require_order3(t, "whiten");
  if (t.dims[0] != t.dims[1] || t.dims[1] != t.dims[2]) {
    throw validation_error("whiten: tensor must be cubical");
  }
  if (m.rows != t.dims[0]) {
    throw validation_error("whiten: matrix and tensor dimensions disagree");
  }
  WhiteningContext ctx = build_context(m, k, "second moment");
  DenseTensor tw = multilinear(t, ctx.w, ctx.w, ctx.w);
  return {std::move(tw), std::move(ctx)};
}

std::vector<double> unwhiten(const WhiteningContext& ctx, const std::vector<double>& v,
                             double lambda_tilde) {
  if (v.size() != ctx.k) {
    throw validation_error("unwhiten: component length must equal the whitened rank");
  }
  if (!(lambda_tilde > 0.0)) {
    throw validation_error("unwhiten: assumed weight must be positive");
  }
  return lift(ctx.u, ctx.gamma, v, 1.0 / std::sqrt(lambda_tilde));
}

std::pair<DenseTensor, SymmetrizationContext> symmetrize(const DenseTensor& t, const Matrix& ma,
                                                         const Matrix& mb, const Matrix& mc,
                                                         const Matrix& mab, const Matrix& mac,
                                                         std::size_t k, const Matrix* m_bc) {
  require_order3(t, "symmetrize");
  const std::size_t d1 = t.dims[0];
  const std::size_t d2 = t.dims[1];
  const std::size_t d3 = t.dims[2];
  if (ma.rows != d1 || mb.rows != d2 || mc.rows != d3) {
    throw validation_error("symmetrize: per-mode second moments must match the tensor dims");
  }
  if (mab.rows != d1 || mab.cols != d2 || mac.rows != d1 || mac.cols != d3) {
    throw validation_error("symmetrize: cross moments must be d1 x d2 and d1 x d3");
  }
  SymmetrizationContext ctx;
  ctx.a = build_context(ma, k, "mode-1 moment");
  ctx.b = build_context(mb, k, "mode-2 moment");
  ctx.c = build_context(mc, k, "mode-3 moment");
  ctx.r_ab = matmul(transpose(ctx.a.w), matmul(mab, ctx.b.w));
  ctx.r_ac = matmul(transpose(ctx.a.w), matmul(mac, ctx.c.w));
  if (m_bc != nullptr) {
    if (m_bc->rows != d2 || m_bc->cols != d3) {
      throw validation_error("symmetrize: the (b,c) cross moment must be d2 x d3");
    }
    // The pipeline never needs this moment; the flag lets callers surface
    // that a supplied input had no effect.
    ctx.mbc_supplied = true;
  }
  DenseTensor tsym = multilinear(t, ctx.a.w, matmul(ctx.b.w, transpose(ctx.r_ab)),
                                 matmul(ctx.c.w, transpose(ctx.r_ac)));
  return {std::move(tsym), std::move(ctx)};
}

ModeTriple unsymmetrize(const SymmetrizationContext& ctx, const std::vector<double>& ahat,
                        double lt_a, double lt_ab, double lt_ac) {
  if (ahat.size() != ctx.a.k) {
    throw validation_error("unsymmetrize: component length must equal the whitened rank");
  }
  if (!(lt_a > 0.0) || !(lt_ab > 0.0) || !(lt_ac > 0.0)) {
    throw validation_error("unsymmetrize: assumed weights must be positive");
  }
  ModeTriple out;
  const double root_lt_a = std::sqrt(lt_a);
  out.a = lift(ctx.a.u, ctx.a.gamma, ahat, 1.0 / root_lt_a);
  out.b = lift(ctx.b.u, ctx.b.gamma, matvec_t(ctx.r_ab, ahat), root_lt_a / lt_ab);
  out.c = lift(ctx.c.u, ctx.c.gamma, matvec_t(ctx.r_ac, ahat), root_lt_a / lt_ac);
  return out;
}

std::pair<KruskalForm, DecompositionReport> decompose_nonorthogonal(const DenseTensor& t,
                                                                    const Matrix& m, std::size_t k,
                                                                    const PowerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto [tw, ctx] = whiten(t, m, k);
  auto [kw, report] = decompose_orthogonal(tw, k, cfg);

  const std::size_t d = t.dims[0];
  KruskalForm out;
  out.weights.resize(k);
  Matrix factor(d, k);
  report.scale_invariant_weights.resize(k);
  report.component_scales.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::vector<double> ahat = unwhiten(ctx, kw.factors[0].column(j), 1.0);
    const double s = norm2(ahat);
    if (!(s > 0.0)) {
      throw numerical_error("decompose_nonorthogonal: recovered a zero component");
    }
    std::vector<double> unit = ahat;
    for (double& x : unit) x /= s;
    factor.set_column(j, unit);
    // Splitting scale from direction keeps the reconstruction invariant:
    // (mu * s^3) * (ahat/s)^x3 = mu * ahat^x3.
    out.weights[j] = kw.weights[j] * s * s * s;
    report.scale_invariant_weights[j] = kw.weights[j];
    report.component_scales[j] = s;
  }
  out.factors = {factor, factor, factor};

  report.sigma_min_m = std::fabs(ctx.gamma[k - 1]);
  report.lambda_min = *std::min_element(kw.weights.begin(), kw.weights.end());
  report.lambda_max = *std::max_element(kw.weights.begin(), kw.weights.end());
  report.notes.push_back("deflation residual is measured in whitened coordinates");

  DenseTensor diff = kruskal_to_tensor(out);
  for (std::size_t i = 0; i < diff.size(); ++i) diff.data[i] = t.data[i] - diff.data[i];
  report.residual_fro = frobenius_norm(diff);
  report.residual_spectral_est = spectral_norm_estimate(diff);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(out), std::move(report)};
}

}  // namespace cpd
