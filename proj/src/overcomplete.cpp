// SPDX-License-Identifier: MIT
#include "cpd/overcomplete.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"
#include "cpd/simdiag.hpp"
#include "cpd/svd.hpp"
#include "cpd/whiten.hpp"

namespace cpd {
namespace {

// Index of (p,q), p <= q, in the lexicographic enumeration of pairs.
std::size_t paired_index(std::size_t p, std::size_t q, std::size_t m) {
  return p * m - p * (p - 1) / 2 + (q - p);
}

std::size_t square_side(std::size_t n, const char* op) {
  const auto r = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  if (r * r != n) throw validation_error(std::string(op) + ": length is not a perfect square");
  return r;
}

// Symmetric k x k matrix named by its paired-basis coordinates. The
// coefficient of the p<q basis element lands in both (p,q) and (q,p).
Matrix unpair_symmetric(const std::vector<double>& y, std::size_t k) {
  Matrix out(k, k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = p; q < k; ++q) {
      const double v = y[paired_index(p, q, k)];
      out(p, q) = v;
      out(q, p) = v;
    }
  return out;
}

struct TopPair {
  double value = 0.0;  // signed eigenvalue of largest magnitude
  double second = 0.0;
  std::vector<double> vec;
};

// Top eigenpair of the symmetrized matricization of a d^2 vector. A strong
// second direction means the vector is not close to a Kronecker square.
TopPair top_pair_of_square(const std::vector<double>& u, const char* op) {
  Matrix b = matricize_square(u);
  Matrix s = scale(add(b, transpose(b)), 0.5);
  SymEigResult eig = symmetric_eig(s);
  std::size_t best = 0;
  for (std::size_t i = 1; i < eig.values.size(); ++i)
    if (std::fabs(eig.values[i]) > std::fabs(eig.values[best])) best = i;
  double second = 0.0;
  for (std::size_t i = 0; i < eig.values.size(); ++i)
    if (i != best) second = std::max(second, std::fabs(eig.values[i]));
  if (second > 0.1 * std::fabs(eig.values[best]))
    throw numerical_error(std::string(op) +
                          ": recovered component does not matricize to a rank-1 matrix");
  return {eig.values[best], second, eig.vectors.column(best)};
}

std::vector<double> kron_square(const std::vector<double>& v) {
  const std::size_t d = v.size();
  std::vector<double> out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t l = 0; l < d; ++l) out[i * d + l] = v[i] * v[l];
  return out;
}

void require_cubical_symmetric(const DenseTensor& t, const char* op) {
  for (std::size_t d : t.dims)
    if (d != t.dims[0]) throw validation_error(std::string(op) + ": cubical tensor required");
  if (symmetry_defect(t) > 1e-8)
    throw validation_error(std::string(op) + ": tensor is not symmetric; symmetrize it first");
}

KruskalForm sorted_by_weight(std::vector<double> weights, Matrix factors, std::size_t order) {
  const std::size_t k = weights.size();
  std::vector<std::size_t> idx(k);
  for (std::size_t j = 0; j < k; ++j) idx[j] = j;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  std::vector<double> w(k);
  Matrix f(factors.rows, k);
  for (std::size_t j = 0; j < k; ++j) {
    w[j] = weights[idx[j]];
    f.set_column(j, factors.column(idx[j]));
  }
  KruskalForm out;
  out.weights = std::move(w);
  out.factors.assign(order, f);
  return out;
}

}  // namespace

std::size_t detector_dimension(std::size_t d) {
  const std::size_t m = d * (d - 1) / 2;
  return m * (m + 1) / 2;
}

std::vector<std::array<std::size_t, 4>> detector_tuples(std::size_t d) {
  std::vector<std::array<std::size_t, 2>> pairs;
  for (std::size_t i = 0; i + 1 < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) pairs.push_back({i, j});
  std::vector<std::array<std::size_t, 4>> out;
  out.reserve(detector_dimension(d));
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (std::size_t q = p; q < pairs.size(); ++q)
      out.push_back({pairs[p][0], pairs[p][1], pairs[q][0], pairs[q][1]});
  return out;
}

Rank1DetectorOutput rank1_detector(const Matrix& a) {
  if (a.rows != a.cols) throw validation_error("rank1_detector: square matrix required");
  double defect = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      defect = std::max(defect, std::fabs(a(i, j) - a(j, i)));
  if (defect > 1e-10 * max_abs(a))
    throw validation_error("rank1_detector: matrix is not symmetric");
  Rank1DetectorOutput out;
  out.tuples = detector_tuples(a.rows);
  out.values.reserve(out.tuples.size());
  for (const auto& t : out.tuples)
    out.values.push_back(a(t[0], t[2]) * a(t[1], t[3]) - a(t[0], t[3]) * a(t[1], t[2]));
  return out;
}

Matrix matricize_square(const std::vector<double>& u) {
  const std::size_t d = square_side(u.size(), "matricize_square");
  return Matrix(d, d, u);
}

std::vector<double> lifted_square(const std::vector<double>& x) {
  const std::size_t m = x.size();
  std::vector<double> out;
  out.reserve(m * (m + 1) / 2);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = p; q < m; ++q) out.push_back(x[p] * x[q]);
  return out;
}

Matrix linearized_detector_matrix(const Matrix& p) {
  const std::size_t d = square_side(p.rows, "linearized_detector_matrix");
  const std::size_t m = p.cols;
  const auto tuples = detector_tuples(d);
  std::vector<Matrix> slabs;
  slabs.reserve(m);
  for (std::size_t c = 0; c < m; ++c) slabs.push_back(matricize_square(p.column(c)));
  Matrix z(tuples.size(), m * (m + 1) / 2);
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    const auto [i1, i2, j1, j2] = tuples[r];
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) {
        const Matrix& ma = slabs[a];
        const Matrix& mb = slabs[b];
        double v = ma(i1, j1) * mb(i2, j2) - ma(i1, j2) * mb(i2, j1);
        // off-diagonal paired basis elements carry both orders
        if (a != b) v += mb(i1, j1) * ma(i2, j2) - mb(i1, j2) * ma(i2, j1);
        z(r, paired_index(a, b, m)) = v;
      }
  }
  return z;
}

KruskalForm foobi(const DenseTensor& t, std::size_t k, std::uint64_t seed) {
  if (t.order() != 4) throw validation_error("foobi: order-4 tensor required");
  require_cubical_symmetric(t, "foobi");
  const std::size_t d = t.dims[0];
  if (k < 1) throw validation_error("foobi: rank must be positive");
  if (k > d * d) throw validation_error("foobi: rank exceeds d^2");

  // flat layouts agree, so the pairwise flattening is the same buffer
  Matrix m(d * d, d * d, t.data);
  SymEigResult mg = symmetric_eig(m);
  if (mg.values[0] <= 0.0 || mg.values[k - 1] <= 1e-8 * mg.values[0]) {
    std::ostringstream msg;
    msg << "foobi: flattening has fewer than " << k
        << " strong positive directions; leading eigenvalues:";
    for (std::size_t i = 0; i < std::min<std::size_t>(k, mg.values.size()); ++i)
      msg << " " << mg.values[i];
    throw numerical_error(msg.str());
  }
  Matrix p(d * d, k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col = mg.vectors.column(j);
    const double s = std::sqrt(mg.values[j]);
    for (double& x : col) x *= s;
    p.set_column(j, col);
  }

  // Every vector in a one-dimensional span already matricizes to the single
  // component, so the detector stage has nothing to separate.
  Matrix x_basis = Matrix::identity(k);
  if (k > 1) {
    Matrix z = linearized_detector_matrix(p);
    SymEigResult zg = symmetric_eig(gram(z));
    // singular values recomputed as ||Z v||: accurate near zero where the
    // Gram eigenvalues bottom out at eps * sigma_1^2
    std::vector<std::pair<double, std::size_t>> sig(zg.values.size());
    for (std::size_t j = 0; j < zg.values.size(); ++j)
      sig[j] = {norm2(matvec(z, zg.vectors.column(j))), j};
    std::sort(sig.begin(), sig.end());
    const double top = sig.back().first;
    std::size_t nullity = 0;
    while (nullity < sig.size() && sig[nullity].first <= 1e-8 * top) ++nullity;
    if (nullity != k) {
      std::ostringstream msg;
      msg << "foobi: detector null space has dimension " << nullity << ", expected " << k
          << "; singular values around the cut:";
      for (std::size_t j = 0; j < std::min<std::size_t>(k + 2, sig.size()); ++j)
        msg << " " << sig[j].first / top;
      throw numerical_error(msg.str());
    }

    bool diagonalized = false;
    for (std::size_t attempt = 0; attempt < 4 && !diagonalized; ++attempt) {
      std::vector<double> cu = Rng::stream(seed, attempt, 0).gaussian_vec(k);
      std::vector<double> cv = Rng::stream(seed, attempt, 1).gaussian_vec(k);
      const std::size_t paired = k * (k + 1) / 2;
      std::vector<double> yu(paired, 0.0), yv(paired, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        const std::vector<double> y = zg.vectors.column(sig[j].second);
        axpy(cu[j], y, yu);
        axpy(cv[j], y, yv);
      }
      Matrix mu = unpair_symmetric(yu, k);
      Matrix mv = unpair_symmetric(yv, k);
      Matrix w = matmul(mu, pseudo_inverse(mv));
      w = scale(add(w, transpose(w)), 0.5);
      SymEigResult we = symmetric_eig(w);
      double scale_w = 0.0, gap = std::numeric_limits<double>::infinity();
      for (double v : we.values) scale_w = std::max(scale_w, std::fabs(v));
      for (std::size_t j = 0; j + 1 < k; ++j)
        gap = std::min(gap, std::fabs(we.values[j] - we.values[j + 1]));
      if (scale_w > 0.0 && gap >= 1e-6 * scale_w) {
        x_basis = we.vectors;
        diagonalized = true;
      }
    }
    if (!diagonalized)
      throw numerical_error("foobi: eigenvalue collisions persisted after 3 redraws");
  }

  std::vector<double> weights(k);
  Matrix factors(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    TopPair tp = top_pair_of_square(matvec(p, x_basis.column(j)), "foobi");
    weights[j] = tp.value * tp.value;
    factors.set_column(j, tp.vec);
  }
  return sorted_by_weight(std::move(weights), std::move(factors), 4);
}

KruskalForm tensorize_decompose(const DenseTensor& t, std::size_t k, const PowerConfig& cfg) {
  if (t.order() != 5 && t.order() != 6)
    throw validation_error("tensorize: tensor order must be 5 or 6");
  require_cubical_symmetric(t, "tensorize");
  const std::size_t d = t.dims[0];
  if (k < 1) throw validation_error("tensorize: rank must be positive");
  if (k > d * (d + 1) / 2)
    throw validation_error("tensorize: rank exceeds C(d+1,2), the Kronecker-square span limit");
  const std::size_t dd = d * d;

  KruskalForm inner;
  if (t.order() == 6) {
    DenseTensor cube({dd, dd, dd});
    cube.data = t.data;
    // The identity slice weights every component by ||a_j||^2 > 0, keeping
    // the slice matrix full rank on the component span. Random positive
    // semidefinite mixes cover coincidental cancellations.
    std::string last = "tensorize: no usable slice matrix";
    bool done = false;
    for (std::size_t attempt = 0; attempt < 4 && !done; ++attempt) {
      std::vector<double> w(dd, 0.0);
      if (attempt == 0) {
        for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
      } else {
        Matrix g(d, d);
        g.data = Rng::stream(cfg.seed, attempt, 9).gaussian_vec(dd);
        w = matmul(g, transpose(g)).data;
      }
      try {
        inner = decompose_nonorthogonal(cube, slice_contract(cube, w), k, cfg).first;
        done = true;
      } catch (const numerical_error& e) {
        last = e.what();
      }
    }
    if (!done) throw numerical_error(last);
  } else {
    DenseTensor resh({dd, dd, d});
    resh.data = t.data;
    inner = simdiag(resh, k, cfg.seed);
  }

  std::vector<double> weights(k);
  Matrix factors(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    TopPair tp = top_pair_of_square(inner.factors[0].column(j), "tensorize");
    std::vector<double> v = tp.vec;
    const std::vector<double> vv = kron_square(v);
    // project every mode onto the canonical rank-1 direction; the product
    // restores the reconstruction coefficient with all signs accounted for
    double lam = inner.weights[j];
    for (std::size_t mode = 0; mode + 1 < inner.factors.size(); ++mode)
      lam *= dot(inner.factors[mode].column(j), vv);
    if (t.order() == 5) {
      lam *= dot(inner.factors[2].column(j), v);
      if (lam < 0.0) {  // odd order folds the sign into the vector
        lam = -lam;
        for (double& x : v) x = -x;
      }
    } else {
      lam *= dot(inner.factors[2].column(j), vv);
    }
    weights[j] = lam;
    factors.set_column(j, v);
  }
  return sorted_by_weight(std::move(weights), std::move(factors), t.order());
}

DenseTensor lift_third_order(const DenseTensor& t) {
  if (t.order() != 3) throw validation_error("lift: order-3 tensor required");
  for (std::size_t d : t.dims)
    if (d != t.dims[0]) throw validation_error("lift: cubical tensor required");
  const std::size_t d = t.dims[0];
  // out[(i1,i2),(i3,i4)] = sum_i T[i,i1,i2] T[i,i3,i4] is the Gram matrix of
  // the mode-0 unfolding, and its flat layout is already the order-4 layout
  Matrix g = gram(unfold(t, 0));
  DenseTensor out({d, d, d, d});
  out.data = std::move(g.data);
  return out;
}

}  // namespace cpd
