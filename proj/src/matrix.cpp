// SPDX-License-Identifier: MIT
#include "cpd/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "cpd/errors.hpp"

namespace cpd {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols) throw validation_error("Matrix: data length must equal rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> v(rows);
  for (std::size_t i = 0; i < rows; ++i) v[i] = (*this)(i, j);
  return v;
}

void Matrix::set_column(std::size_t j, const std::vector<double>& v) {
  if (v.size() != rows) throw validation_error("set_column: length mismatch");
  for (std::size_t i = 0; i < rows; ++i) (*this)(i, j) = v[i];
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw validation_error("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  // i-k-j order keeps the b rows streaming.
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = &c.data[i * c.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw validation_error("add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw validation_error("sub: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (auto& x : c.data) x *= s;
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw validation_error("hadamard: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw validation_error("khatri_rao: column counts differ");
  Matrix c(a.rows * b.rows, a.cols);
  for (std::size_t j = 0; j < a.cols; ++j)
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double aij = a(i, j);
      for (std::size_t l = 0; l < b.rows; ++l) c(l + i * b.rows, j) = aij * b(l, j);
    }
  return c;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (x.size() != a.cols) throw validation_error("matvec: length mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double acc = 0.0;
    const double* ai = &a.data[i * a.cols];
    for (std::size_t j = 0; j < a.cols; ++j) acc += ai[j] * x[j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x) {
  if (x.size() != a.rows) throw validation_error("matvec_t: length mismatch");
  std::vector<double> y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* ai = &a.data[i * a.cols];
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += ai[j] * xi;
  }
  return y;
}

Matrix gram(const Matrix& a) {
  Matrix g(a.cols, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = &a.data[i * a.cols];
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double v = ai[p];
      if (v == 0.0) continue;
      for (std::size_t q = 0; q < a.cols; ++q) g(p, q) += v * ai[q];
    }
  }
  return g;
}

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data) s += x * x;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw validation_error("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw validation_error("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<double> normalized(const std::vector<double>& a) {
  const double n = norm2(a);
  if (n == 0.0) throw numerical_error("normalized: zero vector");
  std::vector<double> v = a;
  for (auto& x : v) x /= n;
  return v;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  if (x.size() != y.size()) throw validation_error("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Matrix outer(const std::vector<double>& u, const std::vector<double>& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

}  // namespace cpd
