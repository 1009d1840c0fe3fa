// SPDX-License-Identifier: MIT
#include "cpd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"

namespace cpd {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw validation_error("DenseTensor: order must be positive");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw validation_error("DenseTensor: dims must be positive");
    n *= d;
  }
  return n;
}

// Advances a multi-index in last-fastest order; returns false after the last one.
bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  for (std::size_t t = dims.size(); t-- > 0;) {
    if (++idx[t] < dims[t]) return true;
    idx[t] = 0;
  }
  return false;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape) : dims(std::move(shape)) {
  data.assign(checked_product(dims), 0.0);
}

std::size_t DenseTensor::offset(std::span<const std::size_t> idx) const {
  if (idx.size() != dims.size()) throw validation_error("offset: index order mismatch");
  std::size_t off = 0;
  for (std::size_t t = 0; t < dims.size(); ++t) {
    if (idx[t] >= dims[t]) throw validation_error("offset: index out of range");
    off = off * dims[t] + idx[t];
  }
  return off;
}

double DenseTensor::at(std::initializer_list<std::size_t> idx) const {
  const std::vector<std::size_t> v(idx);
  return data[offset(v)];
}

double& DenseTensor::at(std::initializer_list<std::size_t> idx) {
  const std::vector<std::size_t> v(idx);
  return data[offset(v)];
}

DenseTensor outer_rank1(double weight, const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) throw validation_error("outer_rank1: no vectors");
  std::vector<std::size_t> dims;
  dims.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.empty()) throw validation_error("outer_rank1: empty vector");
    dims.push_back(v.size());
  }
  DenseTensor t(dims);
  std::vector<std::size_t> idx(dims.size(), 0);
  std::size_t off = 0;
  do {
    double prod = weight;
    for (std::size_t m = 0; m < dims.size(); ++m) prod *= vectors[m][idx[m]];
    t.data[off++] = prod;
  } while (next_index(idx, dims));
  return t;
}

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order()) throw validation_error("unfold: mode out of range");
  const std::size_t rows = t.dims[mode];
  const std::size_t cols = t.size() / rows;
  Matrix m(rows, cols);
  std::vector<std::size_t> idx(t.order(), 0);
  std::size_t off = 0;
  do {
    // Column index: remaining indices in original order, last fastest.
    std::size_t col = 0;
    for (std::size_t u = 0; u < t.order(); ++u) {
      if (u == mode) continue;
      col = col * t.dims[u] + idx[u];
    }
    m(idx[mode], col) = t.data[off++];
  } while (next_index(idx, t.dims));
  return m;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const std::vector<std::size_t>& shape) {
  if (mode >= shape.size()) throw validation_error("fold: mode out of range");
  const std::size_t n = checked_product(shape);
  if (m.rows != shape[mode] || m.rows * m.cols != n)
    throw validation_error("fold: matrix shape inconsistent with target dims");
  DenseTensor t(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    std::size_t col = 0;
    for (std::size_t u = 0; u < shape.size(); ++u) {
      if (u == mode) continue;
      col = col * shape[u] + idx[u];
    }
    t.data[off++] = m(idx[mode], col);
  } while (next_index(idx, shape));
  return t;
}

DenseTensor multilinear(const DenseTensor& t, const Matrix& a, const Matrix& b, const Matrix& c) {
  if (t.order() != 3) throw validation_error("multilinear: order-3 input required");
  if (a.rows != t.dims[0] || b.rows != t.dims[1] || c.rows != t.dims[2])
    throw validation_error("multilinear: row counts must match tensor dims");
  const std::size_t d1 = t.dims[0], d2 = t.dims[1], d3 = t.dims[2];
  // Contract one mode at a time; mode 3 first keeps the inner stride 1.
  std::vector<double> s1(d1 * d2 * c.cols, 0.0);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      const double* tij = &t.data[(i * d2 + j) * d3];
      double* out = &s1[(i * d2 + j) * c.cols];
      for (std::size_t l = 0; l < d3; ++l) {
        const double v = tij[l];
        if (v == 0.0) continue;
        const double* cl = &c.data[l * c.cols];
        for (std::size_t q = 0; q < c.cols; ++q) out[q] += v * cl[q];
      }
    }
  std::vector<double> s2(d1 * b.cols * c.cols, 0.0);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      const double* in = &s1[(i * d2 + j) * c.cols];
      const double* bj = &b.data[j * b.cols];
      for (std::size_t p = 0; p < b.cols; ++p) {
        const double w = bj[p];
        if (w == 0.0) continue;
        double* out = &s2[(i * b.cols + p) * c.cols];
        for (std::size_t q = 0; q < c.cols; ++q) out[q] += w * in[q];
      }
    }
  DenseTensor r({a.cols, b.cols, c.cols});
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t o = 0; o < a.cols; ++o) {
      const double w = a(i, o);
      if (w == 0.0) continue;
      const double* in = &s2[i * b.cols * c.cols];
      double* out = &r.data[o * b.cols * c.cols];
      for (std::size_t pq = 0; pq < b.cols * c.cols; ++pq) out[pq] += w * in[pq];
    }
  return r;
}

std::vector<double> apply(const DenseTensor& t, const std::vector<double>& v, const std::vector<double>& w) {
  if (t.order() != 3) throw validation_error("apply: order-3 input required");
  const std::size_t d1 = t.dims[0], d2 = t.dims[1], d3 = t.dims[2];
  if (v.size() != d2 || w.size() != d3) throw validation_error("apply: vector length mismatch");
  std::vector<double> q(d2 * d3);
  for (std::size_t j = 0; j < d2; ++j)
    for (std::size_t l = 0; l < d3; ++l) q[j * d3 + l] = v[j] * w[l];
  std::vector<double> out(d1, 0.0);
  for (std::size_t i = 0; i < d1; ++i) {
    const double* ti = &t.data[i * d2 * d3];
    double acc = 0.0;
    for (std::size_t jl = 0; jl < d2 * d3; ++jl) acc += ti[jl] * q[jl];
    out[i] = acc;
  }
  return out;
}

double apply(const DenseTensor& t, const std::vector<double>& u, const std::vector<double>& v,
             const std::vector<double>& w) {
  if (t.order() != 3) throw validation_error("apply: order-3 input required");
  if (u.size() != t.dims[0]) throw validation_error("apply: vector length mismatch");
  return dot(u, cpd::apply(t, v, w));
}

Matrix apply(const DenseTensor& t, const std::vector<double>& w) {
  if (t.order() != 3) throw validation_error("apply: order-3 input required");
  const std::size_t d1 = t.dims[0], d2 = t.dims[1], d3 = t.dims[2];
  if (w.size() != d3) throw validation_error("apply: vector length mismatch");
  Matrix m(d1, d2);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      const double* tij = &t.data[(i * d2 + j) * d3];
      double acc = 0.0;
      for (std::size_t l = 0; l < d3; ++l) acc += tij[l] * w[l];
      m(i, j) = acc;
    }
  return m;
}

DenseTensor contract_last_mode(const DenseTensor& t, const std::vector<double>& v) {
  if (t.order() < 2) throw validation_error("contract_last_mode: order must be >= 2");
  const std::size_t last = t.dims.back();
  if (v.size() != last) throw validation_error("contract_last_mode: vector length mismatch");
  std::vector<std::size_t> shape(t.dims.begin(), t.dims.end() - 1);
  DenseTensor r(shape);
  for (std::size_t o = 0; o < r.size(); ++o) {
    const double* blk = &t.data[o * last];
    double acc = 0.0;
    for (std::size_t l = 0; l < last; ++l) acc += blk[l] * v[l];
    r.data[o] = acc;
  }
  return r;
}

double frobenius_norm(const DenseTensor& t) {
  double s = 0.0;
  for (double x : t.data) s += x * x;
  return std::sqrt(s);
}

double spectral_norm_estimate(const DenseTensor& t, std::size_t restarts, std::size_t iters,
                              std::uint64_t seed, double tol) {
  if (t.order() != 3) throw validation_error("spectral_norm_estimate: order-3 input required");
  if (restarts < 1) throw validation_error("spectral_norm_estimate: restarts must be >= 1");
  const std::size_t d1 = t.dims[0], d2 = t.dims[1], d3 = t.dims[2];
  double best = 0.0;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, 0x737065ULL, r);
    std::vector<double> u = rng.unit_sphere(d1);
    std::vector<double> v = rng.unit_sphere(d2);
    std::vector<double> w = rng.unit_sphere(d3);
    double prev = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
      // Alternating best-response updates in u, v, w.
      Matrix slice = cpd::apply(t, w);  // d1 x d2
      std::vector<double> nu = matvec(slice, v);
      double n = norm2(nu);
      if (n == 0.0) break;
      for (auto& x : nu) x /= n;
      u = nu;
      std::vector<double> nv = matvec_t(slice, u);
      n = norm2(nv);
      if (n == 0.0) break;
      for (auto& x : nv) x /= n;
      v = nv;
      std::vector<double> nw(d3, 0.0);
      for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < d2; ++j) {
          const double c = u[i] * v[j];
          if (c == 0.0) continue;
          const double* tij = &t.data[(i * d2 + j) * d3];
          for (std::size_t l = 0; l < d3; ++l) nw[l] += c * tij[l];
        }
      const double val = norm2(nw);
      if (val == 0.0) break;
      for (auto& x : nw) x /= val;
      w = nw;
      if (std::abs(val - prev) < tol * std::max(1.0, val)) {
        prev = val;
        break;
      }
      prev = val;
    }
    double val = std::abs(cpd::apply(t, u, v, w));
    best = std::max(best, val);
  }
  return best;
}

DenseTensor kruskal_to_tensor(const KruskalForm& k) {
  if (k.factors.size() < 2) throw validation_error("kruskal_to_tensor: need at least two modes");
  std::vector<std::size_t> dims;
  for (const auto& f : k.factors) {
    dims.push_back(f.rows);
    if (f.cols != k.rank()) throw validation_error("kruskal_to_tensor: factor rank mismatch");
  }
  DenseTensor t(dims);
  if (t.order() == 3) {
    const std::size_t d1 = dims[0], d2 = dims[1], d3 = dims[2], r = k.rank();
    const Matrix &a = k.factors[0], &b = k.factors[1], &c = k.factors[2];
    for (std::size_t i = 0; i < d1; ++i)
      for (std::size_t j = 0; j < d2; ++j) {
        double* out = &t.data[(i * d2 + j) * d3];
        for (std::size_t q = 0; q < r; ++q) {
          const double s = k.weights[q] * a(i, q) * b(j, q);
          if (s == 0.0) continue;
          for (std::size_t l = 0; l < d3; ++l) out[l] += s * c(l, q);
        }
      }
    return t;
  }
  std::vector<std::size_t> idx(dims.size(), 0);
  std::size_t off = 0;
  do {
    double acc = 0.0;
    for (std::size_t q = 0; q < k.rank(); ++q) {
      double prod = k.weights[q];
      for (std::size_t m = 0; m < dims.size(); ++m) prod *= k.factors[m](idx[m], q);
      acc += prod;
    }
    t.data[off++] = acc;
  } while (next_index(idx, dims));
  return t;
}

double symmetry_defect(const DenseTensor& t) {
  for (std::size_t d : t.dims)
    if (d != t.dims[0]) throw validation_error("symmetry_defect: cubical tensor required");
  const double scale = [&] {
    double m = 0.0;
    for (double x : t.data) m = std::max(m, std::abs(x));
    return m;
  }();
  if (scale == 0.0) return 0.0;
  std::vector<std::size_t> idx(t.order(), 0);
  std::vector<std::size_t> p(t.order());
  double worst = 0.0;
  std::size_t off = 0;
  do {
    const double v = t.data[off++];
    p.assign(idx.begin(), idx.end());
    std::sort(p.begin(), p.end());
    do {
      worst = std::max(worst, std::abs(v - t.data[t.offset(p)]));
    } while (std::next_permutation(p.begin(), p.end()));
  } while (next_index(idx, t.dims));
  return worst / scale;
}

}  // namespace cpd
