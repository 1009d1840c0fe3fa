// SPDX-License-Identifier: MIT
#include "cpd/als.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"
#include "cpd/svd.hpp"

namespace cpd {
namespace detail {

std::pair<Matrix, std::vector<double>> mode_update(const Matrix& unfolded, const Matrix& fb,
                                                   const Matrix& fc, double alpha) {
  const std::size_t k = fb.cols;
  Matrix g = hadamard(gram(fb), gram(fc));
  for (std::size_t j = 0; j < k; ++j) g(j, j) += alpha;

  SymEigResult eig = symmetric_eig(g);
  double top = 0.0;
  for (double v : eig.values) top = std::max(top, std::fabs(v));
  const double cutoff = static_cast<double>(k) * 2.2e-16 * top;
  for (double v : eig.values) {
    if (std::fabs(v) <= cutoff) {
      throw numerical_error("als: singular Gram matrix; retry with l2_reg > 0");
    }
  }
  Matrix ginv(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double inv = 1.0 / eig.values[j];
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) ginv(p, q) += inv * eig.vectors(p, j) * eig.vectors(q, j);
    }
  }

  Matrix bar = matmul(matmul(unfolded, khatri_rao(fb, fc)), ginv);
  std::vector<double> norms(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col = bar.column(j);
    const double nrm = norm2(col);
    norms[j] = nrm;
    if (nrm > 0.0) {
      for (double& v : col) v /= nrm;
      bar.set_column(j, col);
    }
  }
  return {std::move(bar), std::move(norms)};
}

}  // namespace detail

namespace {

Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform01();
  return m;
}

double relative_residual(const DenseTensor& t, const KruskalForm& kf, double tnorm) {
  DenseTensor hat = kruskal_to_tensor(kf);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = t.data[i] - hat.data[i];
    acc += d * d;
  }
  return std::sqrt(acc) / tnorm;
}

void validate_common(const DenseTensor& t, const AlsConfig& cfg) {
  if (t.order() != 3) throw validation_error("als: tensor must have order 3");
  if (cfg.rank == 0) throw validation_error("als: rank must be at least 1");
  if (!(cfg.tol > 0.0)) throw validation_error("als: tol must be positive");
  if (cfg.l2_reg < 0.0) throw validation_error("als: l2_reg must be nonnegative");
  if (cfg.max_iters == 0) throw validation_error("als: max_iters must be at least 1");
}

struct Snapshot {
  double err = -1.0;
  KruskalForm kf;
};

void maybe_keep(Snapshot& best, double err, const KruskalForm& kf) {
  if (best.err < 0.0 || err < best.err) {
    best.err = err;
    best.kf = kf;
  }
}

}  // namespace

std::pair<KruskalForm, DecompositionReport> als(const DenseTensor& t, const AlsConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_common(t, cfg);
  if (cfg.symmetric_heuristic != SymmetricHeuristic::none) {
    throw validation_error("als: symmetric heuristics belong to als_symmetric");
  }
  const double tnorm = frobenius_norm(t);
  if (tnorm == 0.0) throw validation_error("als: tensor is identically zero");

  const Matrix u0 = unfold(t, 0);
  const Matrix u1 = unfold(t, 1);
  const Matrix u2 = unfold(t, 2);
  const std::size_t k = cfg.rank;

  DecompositionReport report;
  Snapshot best;
  double final_err = 0.0;

  for (std::size_t attempt = 0; attempt < 4; ++attempt) {
    Rng rng = Rng::stream(cfg.seed, attempt, 0);
    KruskalForm cur;
    cur.factors = {uniform_init(rng, t.dims[0], k), uniform_init(rng, t.dims[1], k),
                   uniform_init(rng, t.dims[2], k)};
    cur.weights.assign(k, 1.0);

    detail::DivergenceTracker tracker;
    double prev_err = 0.0;
    bool diverged = false;
    for (std::size_t sweep = 1; sweep <= cfg.max_iters; ++sweep) {
      cur.factors[0] = detail::mode_update(u0, cur.factors[1], cur.factors[2], cfg.l2_reg).first;
      cur.factors[1] = detail::mode_update(u1, cur.factors[0], cur.factors[2], cfg.l2_reg).first;
      auto [c, lam] = detail::mode_update(u2, cur.factors[0], cur.factors[1], cfg.l2_reg);
      cur.factors[2] = std::move(c);
      cur.weights = std::move(lam);

      const double err = relative_residual(t, cur, tnorm);
      if (!std::isfinite(err)) throw numerical_error("als: updates produced NaN");
      report.sweep_errors.push_back(err);
      ++report.iterations;
      maybe_keep(best, err, cur);

      if (sweep > 1 && std::fabs(prev_err - err) < cfg.tol) {
        final_err = err;
        report.residual_fro = err * tnorm;
        report.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return {std::move(cur), std::move(report)};
      }
      if (cfg.l2_reg == 0.0 && sweep > 1 && tracker.feed(prev_err, err)) {
        diverged = true;
        report.notes.push_back("restart " + std::to_string(attempt + 1) +
                               ": error rose five sweeps in a row");
        break;
      }
      prev_err = err;
    }
    if (!diverged) {
      final_err = prev_err;
      report.notes.push_back("stopped at the sweep budget");
      report.residual_fro = final_err * tnorm;
      report.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return {std::move(cur), std::move(report)};
    }
  }

  report.notes.push_back("every attempt diverged; returning the best iterate seen");
  report.residual_fro = best.err * tnorm;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best.kf), std::move(report)};
}

KruskalForm als_symmetric(const DenseTensor& t, const AlsConfig& cfg) {
  validate_common(t, cfg);
  if (cfg.symmetric_heuristic == SymmetricHeuristic::none) {
    throw validation_error("als_symmetric: pick lag_two or lag_one");
  }
  if (t.dims[0] != t.dims[1] || t.dims[1] != t.dims[2]) {
    throw validation_error("als_symmetric: tensor must be cubical");
  }
  if (symmetry_defect(t) > 1e-8) {
    throw validation_error("als_symmetric: tensor is not symmetric");
  }
  const double tnorm = frobenius_norm(t);
  if (tnorm == 0.0) throw validation_error("als_symmetric: tensor is identically zero");

  const Matrix u0 = unfold(t, 0);
  const std::size_t k = cfg.rank;
  const bool lag_two = cfg.symmetric_heuristic == SymmetricHeuristic::lag_two;

  Snapshot best;
  std::string last_failure;
  for (std::size_t attempt = 0; attempt < 4; ++attempt) {
    Rng rng = Rng::stream(cfg.seed, attempt, 0);
    // Mean-zero init. Uniform [0,1) entries start every column within 45
    // degrees of the all-ones axis, and the single-factor iteration then
    // drives all columns onto one component for k >= 3 on most seeds.
    Matrix prev(t.dims[0], k);
    for (double& v : prev.data) v = rng.gaussian();
    Matrix prev2 = prev;
    KruskalForm cur;
    cur.weights.assign(k, 1.0);

    detail::DivergenceTracker tracker;
    double prev_err = 0.0;
    bool diverged = false;
    for (std::size_t sweep = 1; sweep <= cfg.max_iters; ++sweep) {
      std::pair<Matrix, std::vector<double>> upd;
      try {
        upd = detail::mode_update(u0, prev, lag_two ? prev2 : prev, cfg.l2_reg);
      } catch (const numerical_error& e) {
        // A singular Gram here is the terminal stage of column collapse;
        // with alpha = 0 it is handled like divergence, by restarting.
        if (cfg.l2_reg != 0.0 || sweep == 1) throw;
        last_failure = e.what();
        diverged = true;
        break;
      }
      prev2 = std::move(prev);
      prev = std::move(upd.first);
      // An odd power cannot absorb a sign: align each column with the
      // tensor's diagonal value so the reported cube matches the fit. The
      // lagged model itself is invariant to column signs.
      for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col = prev.column(j);
        if (cpd::apply(t, col, col, col) < 0.0) {
          for (double& v : col) v = -v;
          prev.set_column(j, col);
        }
      }
      cur.factors = {prev, prev, prev};
      cur.weights = std::move(upd.second);

      const double err = relative_residual(t, cur, tnorm);
      if (!std::isfinite(err)) throw numerical_error("als_symmetric: updates produced NaN");
      maybe_keep(best, err, cur);
      if (sweep > 1 && std::fabs(prev_err - err) < cfg.tol) return cur;
      if (cfg.l2_reg == 0.0 && sweep > 1 && tracker.feed(prev_err, err)) {
        diverged = true;
        break;
      }
      prev_err = err;
    }
    if (!diverged) return cur;
  }
  if (best.err < 0.0) throw numerical_error(last_failure);
  return best.kf;
}

}  // namespace cpd
