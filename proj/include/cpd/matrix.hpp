// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <vector>

namespace cpd {

/// Dense row-major matrix of doubles. Plumbing type shared by every module.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // length rows*cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  [[nodiscard]] static Matrix identity(std::size_t n);
  [[nodiscard]] std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, const std::vector<double>& v);
};

[[nodiscard]] Matrix transpose(const Matrix& a);
[[nodiscard]] Matrix matmul(const Matrix& a, const Matrix& b);
[[nodiscard]] Matrix add(const Matrix& a, const Matrix& b);
[[nodiscard]] Matrix sub(const Matrix& a, const Matrix& b);
[[nodiscard]] Matrix scale(const Matrix& a, double s);

/// Entry-wise product. Shapes must match.
[[nodiscard]] Matrix hadamard(const Matrix& a, const Matrix& b);

/// Column-wise Kronecker product: column j is a_j ⊗ b_j, the A index varying
/// slower (entry (l + i*rows(b), j) = a(i,j)*b(l,j)). Column counts must match.
[[nodiscard]] Matrix khatri_rao(const Matrix& a, const Matrix& b);

[[nodiscard]] std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
/// aᵀx without forming the transpose.
[[nodiscard]] std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x);

/// aᵀa.
[[nodiscard]] Matrix gram(const Matrix& a);

[[nodiscard]] double frobenius(const Matrix& a);
[[nodiscard]] double max_abs(const Matrix& a);
[[nodiscard]] double max_abs_diff(const Matrix& a, const Matrix& b);

[[nodiscard]] double dot(const std::vector<double>& a, const std::vector<double>& b);
[[nodiscard]] double norm2(const std::vector<double>& a);
/// x/‖x‖; throws numerical_error on a zero vector.
[[nodiscard]] std::vector<double> normalized(const std::vector<double>& a);
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);

/// Outer product column * rowᵀ.
[[nodiscard]] Matrix outer(const std::vector<double>& u, const std::vector<double>& v);

}  // namespace cpd
