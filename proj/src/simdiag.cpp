// SPDX-License-Identifier: MIT
#include "cpd/simdiag.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"
#include "cpd/svd.hpp"

namespace cpd {
namespace detail {
namespace {

using cxd = std::complex<double>;

constexpr double kEps = 2.2e-16;

struct CMat {
  std::size_t n = 0;
  std::vector<cxd> data;
  explicit CMat(std::size_t nn) : n(nn), data(nn * nn) {}
  cxd& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  cxd operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

// Householder similarity reduction; exact zeros written below the subdiagonal.
void hessenberg(CMat& h, CMat& z) {
  const std::size_t n = h.n;
  for (std::size_t j = 0; j + 2 < n; ++j) {
    const std::size_t m = n - 1 - j;
    std::vector<cxd> v(m);
    double xnorm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v[i] = h(j + 1 + i, j);
      xnorm2 += std::norm(v[i]);
    }
    const double xnorm = std::sqrt(xnorm2);
    if (xnorm <= 0.0) continue;
    cxd alpha = -xnorm;
    if (std::abs(v[0]) > 0.0) alpha = -(v[0] / std::abs(v[0])) * xnorm;
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (const cxd& x : v) vnorm2 += std::norm(x);
    if (vnorm2 <= 0.0) continue;
    const double beta = 2.0 / vnorm2;
    // left: rows j+1.., columns j..
    for (std::size_t c = j; c < n; ++c) {
      cxd s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += std::conj(v[i]) * h(j + 1 + i, c);
      s *= beta;
      for (std::size_t i = 0; i < m; ++i) h(j + 1 + i, c) -= s * v[i];
    }
    // right: all rows, columns j+1..
    for (std::size_t r = 0; r < n; ++r) {
      cxd s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += h(r, j + 1 + i) * v[i];
      s *= beta;
      for (std::size_t i = 0; i < m; ++i) h(r, j + 1 + i) -= s * std::conj(v[i]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      cxd s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += z(r, j + 1 + i) * v[i];
      s *= beta;
      for (std::size_t i = 0; i < m; ++i) z(r, j + 1 + i) -= s * std::conj(v[i]);
    }
    h(j + 1, j) = alpha;
    for (std::size_t i = 2; i <= m; ++i) h(j + i, j) = 0.0;
  }
}

// Root of the trailing 2x2 closer to its bottom-right entry.
cxd wilkinson_shift(const CMat& h, std::size_t hi) {
  const cxd a = h(hi - 1, hi - 1);
  const cxd b = h(hi - 1, hi);
  const cxd c = h(hi, hi - 1);
  const cxd d = h(hi, hi);
  const cxd tr = a + d;
  const cxd disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
  const cxd r1 = 0.5 * (tr + disc);
  const cxd r2 = 0.5 * (tr - disc);
  return std::abs(r1 - d) <= std::abs(r2 - d) ? r1 : r2;
}

bool negligible(const CMat& h, std::size_t i) {
  const double bound = kEps * (std::abs(h(i - 1, i - 1)) + std::abs(h(i, i)));
  return std::abs(h(i, i - 1)) <= bound;
}

// One explicit shifted QR step on the active window [lo, hi].
void qr_step(CMat& h, CMat& z, std::size_t lo, std::size_t hi, cxd mu) {
  const std::size_t n = h.n;
  for (std::size_t j = lo; j <= hi; ++j) h(j, j) -= mu;
  std::vector<cxd> gf(hi), gg(hi);
  for (std::size_t i = lo; i < hi; ++i) {
    const cxd f = h(i, i);
    const cxd g = h(i + 1, i);
    const double r = std::sqrt(std::norm(f) + std::norm(g));
    if (r <= 0.0) {
      gf[i] = 1.0;
      gg[i] = 0.0;
      continue;
    }
    gf[i] = f / r;
    gg[i] = g / r;
    // rows i, i+1 from column i on; column i-1 is exactly zero here
    for (std::size_t c = i; c < n; ++c) {
      const cxd top = h(i, c);
      const cxd bot = h(i + 1, c);
      h(i, c) = std::conj(gf[i]) * top + std::conj(gg[i]) * bot;
      h(i + 1, c) = -gg[i] * top + gf[i] * bot;
    }
    h(i + 1, i) = 0.0;
  }
  for (std::size_t i = lo; i < hi; ++i) {
    // columns i, i+1 of the triangular factor; rows above i+2 only
    for (std::size_t r = 0; r <= i + 1; ++r) {
      const cxd left = h(r, i);
      const cxd right = h(r, i + 1);
      h(r, i) = left * gf[i] + right * gg[i];
      h(r, i + 1) = -left * std::conj(gg[i]) + right * std::conj(gf[i]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const cxd left = z(r, i);
      const cxd right = z(r, i + 1);
      z(r, i) = left * gf[i] + right * gg[i];
      z(r, i + 1) = -left * std::conj(gg[i]) + right * std::conj(gf[i]);
    }
  }
  for (std::size_t j = lo; j <= hi; ++j) h(j, j) += mu;
}

}  // namespace

ComplexEig nonsymmetric_eig(const Matrix& a) {
  if (a.rows != a.cols) {
    throw validation_error("nonsymmetric_eig: matrix must be square");
  }
  const std::size_t n = a.rows;
  CMat h(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) h(i, j) = a(i, j);
  }
  hessenberg(h, z);

  std::size_t hi = n - 1;
  std::size_t stuck = 0;
  while (hi > 0) {
    if (negligible(h, hi)) {
      h(hi, hi - 1) = 0.0;
      --hi;
      stuck = 0;
      continue;
    }
    std::size_t lo = hi;
    while (lo > 0 && !negligible(h, lo)) --lo;
    if (lo > 0) h(lo, lo - 1) = 0.0;
    cxd mu = wilkinson_shift(h, hi);
    if (stuck > 0 && stuck % 15 == 0) {
      mu = h(hi, hi) + cxd(1.5 * std::abs(h(hi, hi - 1)), 0.0);
    }
    qr_step(h, z, lo, hi, mu);
    if (++stuck > 100) {
      throw numerical_error("nonsymmetric_eig: QR iteration failed to converge");
    }
  }

  // eigenvectors of the triangular factor by back-substitution
  ComplexEig out;
  out.values.resize(n);
  out.vectors.assign(n, std::vector<cxd>(n, 0.0));
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(h(i, i)));
  for (std::size_t j = 0; j < n; ++j) {
    const cxd lam = h(j, j);
    out.values[j] = lam;
    std::vector<cxd> y(n, 0.0);
    y[j] = 1.0;
    for (std::size_t ii = j; ii-- > 0;) {
      cxd s = 0.0;
      for (std::size_t l = ii + 1; l <= j; ++l) s += h(ii, l) * y[l];
      cxd den = h(ii, ii) - lam;
      const double floor_den = kEps * std::max(scale, 1.0);
      if (std::abs(den) < floor_den) den = floor_den;
      y[ii] = -s / den;
    }
    std::vector<cxd>& v = out.vectors[j];
    for (std::size_t r = 0; r < n; ++r) {
      cxd s = 0.0;
      for (std::size_t l = 0; l <= j; ++l) s += z(r, l) * y[l];
      v[r] = s;
    }
    double nrm2 = 0.0;
    for (const cxd& x : v) nrm2 += std::norm(x);
    const double nrm = std::sqrt(nrm2);
    for (cxd& x : v) x /= nrm;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
    if (out.values[p].real() != out.values[q].real()) {
      return out.values[p].real() > out.values[q].real();
    }
    return out.values[p].imag() > out.values[q].imag();
  });
  ComplexEig sorted;
  sorted.values.resize(n);
  sorted.vectors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted.values[i] = out.values[order[i]];
    sorted.vectors[i] = std::move(out.vectors[order[i]]);
  }
  return sorted;
}

}  // namespace detail

namespace {

constexpr double kDegenerateTol = 1e-6;  // collisions, complex parts, pairing

Matrix take_columns(const Matrix& m, std::size_t k) {
  Matrix out(m.rows, k);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
  }
  return out;
}

Matrix rank_pinv(const SvdResult& s, std::size_t k) {
  Matrix out(s.v.rows, s.u.rows);
  for (std::size_t j = 0; j < k; ++j) {
    const double inv = 1.0 / s.singular_values[j];
    for (std::size_t p = 0; p < s.v.rows; ++p) {
      for (std::size_t q = 0; q < s.u.rows; ++q) out(p, q) += inv * s.v(p, j) * s.u(q, j);
    }
  }
  return out;
}

// Rotate a complex eigenvector onto the real axis; fails when a genuinely
// complex direction remains.
bool realize(const std::vector<std::complex<double>>& v, std::vector<double>& out) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  }
  if (best <= 0.0) return false;
  const std::complex<double> phase = std::conj(v[arg]) / std::abs(v[arg]);
  double imag2 = 0.0;
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::complex<double> w = v[i] * phase;
    out[i] = w.real();
    imag2 += w.imag() * w.imag();
  }
  return std::sqrt(imag2) <= kDegenerateTol;
}

struct AttemptFailure {
  std::string reason;
};

KruskalForm simdiag_attempt(const DenseTensor& t, std::size_t k_arg, bool infer_k,
                            std::uint64_t seed, std::size_t attempt) {
  const std::size_t d1 = t.dims[0];
  const std::size_t d2 = t.dims[1];
  const std::size_t d3 = t.dims[2];

  Rng rng = Rng::stream(seed, 0, attempt);
  const std::vector<double> x = rng.gaussian_vec(d3);
  const std::vector<double> y = rng.gaussian_vec(d3);
  const Matrix mx = cpd::apply(t, x);
  const Matrix my = cpd::apply(t, y);
  const SvdResult sx = svd(mx);
  const SvdResult sy = svd(my);

  std::size_t k = k_arg;
  if (infer_k) k = numerical_rank(sx, d1, d2);
  if (k == 0) throw AttemptFailure{"slice mix is numerically zero"};
  if (numerical_rank(sx, d1, d2) < k || numerical_rank(sy, d1, d2) < k) {
    throw AttemptFailure{"slice mix rank below target rank"};
  }

  const Matrix q = take_columns(sx.u, k);
  const Matrix qb = take_columns(sy.v, k);
  const Matrix pinv_y = rank_pinv(sy, k);
  const Matrix pinv_x = rank_pinv(sx, k);

  // restriction of M_x M_y^+ to its column space
  const Matrix pa = matmul(transpose(q), matmul(mx, matmul(pinv_y, q)));
  // restriction of M_y^T (M_x^+)^T to its column space
  const Matrix pb = matmul(transpose(qb), matmul(transpose(my), matmul(transpose(pinv_x), qb)));

  detail::ComplexEig ea, eb;
  try {
    ea = detail::nonsymmetric_eig(pa);
    eb = detail::nonsymmetric_eig(pb);
  } catch (const numerical_error&) {
    throw AttemptFailure{"eigensolver did not converge"};
  }

  double scale = 1.0;
  for (const auto& v : ea.values) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < k; ++j) {
    if (std::fabs(ea.values[j].imag()) > kDegenerateTol * scale ||
        std::fabs(eb.values[j].imag()) > kDegenerateTol * scale) {
      throw AttemptFailure{"complex eigenvalues beyond tolerance"};
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::abs(ea.values[i] - ea.values[j]) <= kDegenerateTol * scale) {
        throw AttemptFailure{"eigenvalue collision"};
      }
    }
  }

  std::vector<double> alpha(k), beta(k);
  Matrix ahat(d1, k), bhat(d2, k);
  for (std::size_t j = 0; j < k; ++j) {
    alpha[j] = ea.values[j].real();
    beta[j] = eb.values[j].real();
    std::vector<double> ya, yb;
    if (!realize(ea.vectors[j], ya) || !realize(eb.vectors[j], yb)) {
      throw AttemptFailure{"eigenvector stayed complex after phase rotation"};
    }
    ahat.set_column(j, normalized(matvec(q, ya)));
    bhat.set_column(j, normalized(matvec(qb, yb)));
  }

  // greedy pairing on alpha*beta = 1
  std::vector<std::size_t> pair(k);
  std::vector<bool> used(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t q2 = 0; q2 < k; ++q2) {
      if (used[q2]) continue;
      const double miss = std::fabs(alpha[i] * beta[q2] - 1.0);
      if (best < 0.0 || miss < best) {
        best = miss;
        arg = q2;
      }
    }
    if (best > kDegenerateTol) {
      throw AttemptFailure{"eigenvalue products failed to pair"};
    }
    pair[i] = arg;
    used[arg] = true;
  }
  Matrix bpaired(d2, k);
  for (std::size_t i = 0; i < k; ++i) bpaired.set_column(i, bhat.column(pair[i]));

  // least squares for the third mode through the khatri-rao normal equations
  const Matrix kr = khatri_rao(ahat, bpaired);
  const Matrix gh = hadamard(gram(ahat), gram(bpaired));
  const Matrix craw = matmul(matmul(unfold(t, 2), kr), pseudo_inverse(gh));

  KruskalForm out;
  out.weights.resize(k);
  Matrix chat(d3, k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> c = craw.column(j);
    const double lam = norm2(c);
    if (!(lam > 0.0)) throw AttemptFailure{"third-mode component collapsed to zero"};
    for (double& v : c) v /= lam;
    out.weights[j] = lam;

    // largest-|entry| positive on the first two modes, signs folded into c
    std::vector<double> aj = ahat.column(j);
    std::vector<double> bj = bpaired.column(j);
    double flip = 1.0;
    std::size_t arga = 0, argb = 0;
    for (std::size_t i = 1; i < aj.size(); ++i) {
      if (std::fabs(aj[i]) > std::fabs(aj[arga])) arga = i;
    }
    for (std::size_t i = 1; i < bj.size(); ++i) {
      if (std::fabs(bj[i]) > std::fabs(bj[argb])) argb = i;
    }
    if (aj[arga] < 0.0) {
      for (double& v : aj) v = -v;
      flip = -flip;
    }
    if (bj[argb] < 0.0) {
      for (double& v : bj) v = -v;
      flip = -flip;
    }
    if (flip < 0.0) {
      for (double& v : c) v = -v;
    }
    ahat.set_column(j, aj);
    bpaired.set_column(j, bj);
    chat.set_column(j, c);
  }
  out.factors = {ahat, bpaired, chat};
  return out;
}

}  // namespace

namespace {

KruskalForm simdiag_run(const DenseTensor& t, std::size_t k, bool infer, std::uint64_t seed) {
  if (t.order() != 3) throw validation_error("simdiag: tensor must have order 3");
  std::string last = "degenerate draw";
  for (std::size_t attempt = 0; attempt < 4; ++attempt) {
    try {
      return simdiag_attempt(t, k, infer, seed, attempt);
    } catch (const AttemptFailure& f) {
      last = f.reason;
    }
  }
  throw numerical_error("simdiag: " + last + " after 3 redraws");
}

}  // namespace

KruskalForm simdiag(const DenseTensor& t, std::size_t k, std::uint64_t seed) {
  if (t.order() != 3) throw validation_error("simdiag: tensor must have order 3");
  if (k == 0 || k > std::min(t.dims[0], t.dims[1])) {
    throw validation_error("simdiag: rank must lie in [1, min(d1, d2)]");
  }
  return simdiag_run(t, k, false, seed);
}

KruskalForm simdiag(const DenseTensor& t, std::uint64_t seed) {
  return simdiag_run(t, 0, true, seed);
}

}  // namespace cpd
