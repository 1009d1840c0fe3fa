// SPDX-License-Identifier: MIT
#include "cpd/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpd/errors.hpp"

namespace cpd {

namespace {

constexpr double kEps = 2.2e-16;
constexpr std::size_t kJacobiSweepCap = 100;

void require_symmetric(const Matrix& a, const char* who) {
  if (a.rows != a.cols) throw validation_error(std::string(who) + ": square matrix required");
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-8 * std::max(1.0, scale))
        throw validation_error(std::string(who) + ": symmetric matrix required");
}

double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Completes column j of u to an orthonormal set against columns 0..j-1,
// picking the coordinate axis with the largest orthogonal residual.
void complete_column(Matrix& u, std::size_t j) {
  const std::size_t n = u.rows;
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t cand = 0; cand < n; ++cand) {
    std::vector<double> w(n, 0.0);
    w[cand] = 1.0;
    for (std::size_t p = 0; p < j; ++p) {
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += w[i] * u(i, p);
      for (std::size_t i = 0; i < n; ++i) w[i] -= proj * u(i, p);
    }
    const double nn = norm2(w);
    if (nn > best_norm) {
      best_norm = nn;
      best = std::move(w);
    }
  }
  if (best_norm <= 0.0) throw numerical_error("svd: basis completion failed");
  for (auto& x : best) x /= best_norm;
  u.set_column(j, best);
}

}  // namespace

SymEigResult symmetric_eig(const Matrix& input) {
  require_symmetric(input, "symmetric_eig");
  const std::size_t n = input.rows;
  Matrix a = input;
  Matrix v = Matrix::identity(n);
  const double tol = 1e-12 * frobenius(input);
  bool converged = (n < 2) || offdiag_norm(a) <= tol;
  for (std::size_t sweep = 0; sweep < kJacobiSweepCap && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (tau >= 0.0)
          t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
        else
          t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(p, i) = a(i, p);
          a(i, q) = s * aip + c * aiq;
          a(q, i) = a(i, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    converged = offdiag_norm(a) <= tol;
  }
  if (!converged) throw numerical_error("symmetric_eig: no convergence within the sweep cap");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymEigResult r{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    r.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
  }
  return r;
}

SvdResult svd(const Matrix& m) {
  const std::size_t n = m.rows, d = m.cols;
  if (n == 0 || d == 0) throw validation_error("svd: empty matrix");
  const std::size_t r = std::min(n, d);
  const bool cols_thin = d <= n;

  // Eigendecompose the Gram matrix of the thinner side.
  const Matrix g = cols_thin ? gram(m) : gram(transpose(m));
  SymEigResult eig = symmetric_eig(g);

  Matrix fixed(cols_thin ? d : n, r);   // side taken straight from the eigenvectors
  Matrix derived(cols_thin ? n : d, r); // side derived through m
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < fixed.rows; ++i) fixed(i, j) = eig.vectors(i, j);

  const double sigma1 = std::sqrt(std::max(eig.values[0], 0.0));
  const double drop = static_cast<double>(std::max(n, d)) * kEps * sigma1;

  // Derived side: one modified Gram-Schmidt pass; rank-deficient columns
  // are completed from coordinate axes.
  for (std::size_t j = 0; j < r; ++j) {
    std::vector<double> col =
        cols_thin ? matvec(m, fixed.column(j)) : matvec_t(m, fixed.column(j));
    for (std::size_t p = 0; p < j; ++p) {
      double proj = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) proj += col[i] * derived(i, p);
      for (std::size_t i = 0; i < col.size(); ++i) col[i] -= proj * derived(i, p);
    }
    const double nn = norm2(col);
    if (nn > drop && nn > 0.0) {
      for (auto& x : col) x /= nn;
      derived.set_column(j, col);
    } else {
      complete_column(derived, j);
    }
  }

  SvdResult out{cols_thin ? derived : fixed, std::vector<double>(r), cols_thin ? fixed : derived};
  Matrix& u = out.u;
  Matrix& v = out.v;
  for (std::size_t j = 0; j < r; ++j) {
    const std::vector<double> mv = matvec(m, v.column(j));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += u(i, j) * mv[i];
    if (s < 0.0) {
      for (std::size_t i = 0; i < n; ++i) u(i, j) = -u(i, j);
      s = -s;
    }
    out.singular_values[j] = s;
  }

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return out.singular_values[x] > out.singular_values[y];
  });
  SvdResult sorted{Matrix(n, r), std::vector<double>(r), Matrix(d, r)};
  for (std::size_t j = 0; j < r; ++j) {
    sorted.singular_values[j] = out.singular_values[order[j]];
    for (std::size_t i = 0; i < n; ++i) sorted.u(i, j) = u(i, order[j]);
    for (std::size_t i = 0; i < d; ++i) sorted.v(i, j) = v(i, order[j]);
  }

  // Reproducible orientation: largest-magnitude entry of each u_j nonnegative.
  for (std::size_t j = 0; j < r; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(sorted.u(i, j)) > std::abs(sorted.u(arg, j))) arg = i;
    if (sorted.u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) sorted.u(i, j) = -sorted.u(i, j);
      for (std::size_t i = 0; i < d; ++i) sorted.v(i, j) = -sorted.v(i, j);
    }
  }
  return sorted;
}

SvdResult truncated_svd(const Matrix& m, std::size_t k) {
  if (k < 1 || k > std::min(m.rows, m.cols))
    throw validation_error("truncated_svd: rank out of range");
  SvdResult full = svd(m);
  SvdResult out{Matrix(m.rows, k), std::vector<double>(k), Matrix(m.cols, k)};
  for (std::size_t j = 0; j < k; ++j) {
    out.singular_values[j] = full.singular_values[j];
    for (std::size_t i = 0; i < m.rows; ++i) out.u(i, j) = full.u(i, j);
    for (std::size_t i = 0; i < m.cols; ++i) out.v(i, j) = full.v(i, j);
  }
  return out;
}

Matrix low_rank_approx(const Matrix& m, std::size_t k) {
  SvdResult s = truncated_svd(m, k);
  Matrix out(m.rows, m.cols);
  for (std::size_t j = 0; j < k; ++j) {
    const double sj = s.singular_values[j];
    if (sj == 0.0) continue;
    for (std::size_t i = 0; i < m.rows; ++i) {
      const double ui = sj * s.u(i, j);
      if (ui == 0.0) continue;
      for (std::size_t c = 0; c < m.cols; ++c) out(i, c) += ui * s.v(c, j);
    }
  }
  return out;
}

std::size_t numerical_rank(const SvdResult& s, std::size_t n, std::size_t m, double threshold) {
  const double sigma1 = s.singular_values.empty() ? 0.0 : s.singular_values[0];
  const double cut = threshold >= 0.0 ? threshold : static_cast<double>(std::max(n, m)) * kEps * sigma1;
  std::size_t r = 0;
  while (r < s.singular_values.size() && s.singular_values[r] > cut) ++r;
  return r;
}

Matrix pseudo_inverse(const Matrix& m, double threshold) {
  SvdResult s = svd(m);
  const std::size_t r = numerical_rank(s, m.rows, m.cols, threshold);
  Matrix out(m.cols, m.rows);
  for (std::size_t j = 0; j < r; ++j) {
    const double inv = 1.0 / s.singular_values[j];
    for (std::size_t i = 0; i < m.cols; ++i) {
      const double vi = inv * s.v(i, j);
      if (vi == 0.0) continue;
      for (std::size_t c = 0; c < m.rows; ++c) out(i, c) += vi * s.u(c, j);
    }
  }
  return out;
}

Matrix pseudo_inverse_rank(const Matrix& m, std::size_t k) {
  SvdResult s = truncated_svd(m, k);
  const std::size_t r = numerical_rank(s, m.rows, m.cols, -1.0);
  Matrix out(m.cols, m.rows);
  for (std::size_t j = 0; j < std::min(k, r); ++j) {
    const double inv = 1.0 / s.singular_values[j];
    for (std::size_t i = 0; i < m.cols; ++i) {
      const double vi = inv * s.v(i, j);
      if (vi == 0.0) continue;
      for (std::size_t c = 0; c < m.rows; ++c) out(i, c) += vi * s.u(c, j);
    }
  }
  return out;
}

std::pair<Matrix, std::vector<double>> pca(const Matrix& data, std::size_t k) {
  const std::size_t n = data.rows, d = data.cols;
  if (n < 1) throw validation_error("pca: at least one sample required");
  if (k < 1 || k > d) throw validation_error("pca: rank out of range");
  std::vector<double> mean(d, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) mean[j] += data(s, j);
  for (auto& x : mean) x /= static_cast<double>(n);
  Matrix cov(d, d);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = data(s, i) - mean[i];
      if (xi == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += xi * (data(s, j) - mean[j]);
    }
  for (auto& x : cov.data) x /= static_cast<double>(n);
  SymEigResult eig = symmetric_eig(cov);
  Matrix p(d, d);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t a = 0; a < d; ++a) {
      const double ua = eig.vectors(a, j);
      if (ua == 0.0) continue;
      for (std::size_t b = 0; b < d; ++b) p(a, b) += ua * eig.vectors(b, j);
    }
  std::vector<double> offset = mean;
  const std::vector<double> pm = matvec(p, mean);
  for (std::size_t j = 0; j < d; ++j) offset[j] -= pm[j];
  return {std::move(p), std::move(offset)};
}

Matrix whitening_matrix(const Matrix& m, std::size_t k) {
  require_symmetric(m, "whitening_matrix");
  const std::size_t d = m.rows;
  if (k < 1 || k > d) throw validation_error("whitening_matrix: rank out of range");
  SymEigResult eig = symmetric_eig(m);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(eig.values[x]) > std::abs(eig.values[y]);
  });
  const double top = std::abs(eig.values[order[0]]);
  const double cut = static_cast<double>(d) * kEps * top;
  Matrix w(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double gamma = eig.values[order[j]];
    if (std::abs(gamma) <= cut)
      throw numerical_error("whitening_matrix: requested rank exceeds numerical rank");
    const double scale = 1.0 / std::sqrt(std::abs(gamma));
    for (std::size_t i = 0; i < d; ++i) w(i, j) = scale * eig.vectors(i, order[j]);
  }
  return w;
}

CcaResult cca(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.rows == 0) throw validation_error("cca: paired samples required");
  const double n = static_cast<double>(x.rows);
  Matrix mx = gram(x);
  Matrix my = gram(y);
  for (auto& v : mx.data) v /= n;
  for (auto& v : my.data) v /= n;
  Matrix mxy = matmul(transpose(x), y);
  for (auto& v : mxy.data) v /= n;

  Matrix wx = whitening_matrix(mx, x.cols);
  Matrix wy = whitening_matrix(my, y.cols);
  Matrix s = matmul(transpose(wx), matmul(mxy, wy));
  SvdResult dec = svd(s);
  CcaResult out{matmul(wx, dec.u), matmul(wy, dec.v), dec.singular_values};
  return out;
}

}  // namespace cpd
