// SPDX-License-Identifier: MIT
#include "cpd/stream.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpd/errors.hpp"

namespace cpd {

namespace {

void validate_batch(const TripleSampleBatch& b, const char* who) {
  if (b.x1.rows == 0) throw validation_error(std::string(who) + ": empty batch");
  if (b.x1.rows != b.x2.rows || b.x2.rows != b.x3.rows)
    throw validation_error(std::string(who) + ": views disagree on sample count");
  if (b.x1.cols == 0 || b.x2.cols == 0 || b.x3.cols == 0)
    throw validation_error(std::string(who) + ": zero-dimensional view");
}

bool views_identical(const TripleSampleBatch& b) {
  return b.x1.cols == b.x2.cols && b.x2.cols == b.x3.cols && b.x1.data == b.x2.data &&
         b.x2.data == b.x3.data;
}

// Empirical entry (i,j,l) before any deflation; bitwise equal to what
// empirical_tensor stores there.
double raw_entry(const TripleSampleBatch& b, std::size_t i, std::size_t j, std::size_t l) {
  const double dn = static_cast<double>(b.count());
  return detail::pairwise_sum(
             [&](std::size_t s) { return (b.x1(s, i) * b.x2(s, j)) * b.x3(s, l); }, 0,
             b.count()) /
         dn;
}

// Mirrors the dense symmetry_defect on the never-materialized empirical
// tensor: same entries, same scan order, same permutation comparisons, so
// the accept/reject decision matches the dense path exactly.
double batch_symmetry_defect(const TripleSampleBatch& b) {
  const std::size_t d = b.x1.cols;
  double scale = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < d; ++l) scale = std::max(scale, std::abs(raw_entry(b, i, j, l)));
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  std::size_t p[3];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < d; ++l) {
        const double v = raw_entry(b, i, j, l);
        p[0] = i;
        p[1] = j;
        p[2] = l;
        std::sort(p, p + 3);
        do {
          worst = std::max(worst, std::abs(v - raw_entry(b, p[0], p[1], p[2])));
        } while (std::next_permutation(p, p + 3));
      }
  return worst / scale;
}

void require_symmetric_batch(const TripleSampleBatch& b, const char* who) {
  if (b.x1.cols != b.x2.cols || b.x2.cols != b.x3.cols)
    throw validation_error(std::string(who) + ": cubic order-3 tensor required");
  // Identical views make (1/n) sum x^(x)3 symmetric up to multiplication
  // reordering, a few ulp at most; the scan below is only needed when the
  // views differ and the batch claims to be pre-symmetrized.
  if (views_identical(b)) return;
  if (batch_symmetry_defect(b) > 1e-8)
    throw validation_error(std::string(who) +
                           ": tensor is not symmetric; symmetrize or whiten it first");
}

// Contraction oracle over the deflated-but-never-materialized empirical
// tensor. apply() replays the dense kernel entry by entry: the same
// pairwise-tree sum, the same deflation subtraction chain, the same
// row-major accumulation into out[i].
struct StreamOracle {
  const TripleSampleBatch& b;
  const std::vector<double>& lams;
  const std::vector<std::vector<double>>& vs;
  MemoryAccounting* acct;

  double entry(std::size_t i, std::size_t j, std::size_t l,
               const std::vector<double>& cache) const {
    const double dn = static_cast<double>(b.count());
    double e =
        detail::pairwise_sum([&](std::size_t s) { return cache[s] * b.x3(s, l); }, 0, b.count()) /
        dn;
    for (std::size_t m = 0; m < lams.size(); ++m)
      e -= ((lams[m] * vs[m][i]) * vs[m][j]) * vs[m][l];
    return e;
  }

  [[nodiscard]] std::vector<double> apply(const std::vector<double>& theta) const {
    const std::size_t d = theta.size();
    const std::size_t n = b.count();
    if (acct) acct->on_alloc(d * d + d + n);
    std::vector<double> q(d * d);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < d; ++l) q[j * d + l] = theta[j] * theta[l];
    std::vector<double> out(d, 0.0);
    std::vector<double> cache(n);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t s = 0; s < n; ++s) cache[s] = b.x1(s, i) * b.x2(s, j);
        const double* qj = &q[j * d];
        for (std::size_t l = 0; l < d; ++l) acc += entry(i, j, l, cache) * qj[l];
      }
      out[i] = acc;
    }
    // `out` escapes into the engine, which keeps O(d) vectors of its own;
    // the accounting treats the handoff as a free.
    if (acct) acct->on_free(d * d + d + n);
    return out;
  }
};

}  // namespace

TripleSampleBatch make_batch(Matrix x1, Matrix x2, Matrix x3) {
  TripleSampleBatch b{std::move(x1), std::move(x2), std::move(x3)};
  validate_batch(b, "make_batch");
  return b;
}

TripleSampleBatch make_batch(Matrix x) {
  Matrix copy1 = x;
  Matrix copy2 = x;
  return make_batch(std::move(copy1), std::move(copy2), std::move(x));
}

Matrix view_matrix(const DenseTensor& t) {
  if (t.order() != 2) throw validation_error("view_matrix: order-2 tensor required");
  return Matrix(t.dims[0], t.dims[1], t.data);
}

TripleSample sample_at(const TripleSampleBatch& batch, std::size_t i) {
  validate_batch(batch, "sample_at");
  if (i >= batch.count()) throw validation_error("sample_at: index out of range");
  auto row = [&](const Matrix& m) {
    return std::vector<double>(m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols),
                               m.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.cols));
  };
  return TripleSample{row(batch.x1), row(batch.x2), row(batch.x3)};
}

DenseTensor empirical_tensor(const TripleSampleBatch& batch) {
  validate_batch(batch, "empirical_tensor");
  const std::size_t n = batch.count();
  const std::size_t d1 = batch.x1.cols, d2 = batch.x2.cols, d3 = batch.x3.cols;
  const double dn = static_cast<double>(n);
  DenseTensor out({d1, d2, d3});
  std::vector<double> cache(n);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      for (std::size_t s = 0; s < n; ++s) cache[s] = batch.x1(s, i) * batch.x2(s, j);
      double* row = &out.data[(i * d2 + j) * d3];
      for (std::size_t l = 0; l < d3; ++l) {
        row[l] = detail::pairwise_sum(
                     [&](std::size_t s) { return cache[s] * batch.x3(s, l); }, 0, n) /
                 dn;
      }
    }
  return out;
}

std::vector<double> implicit_apply(const TripleSampleBatch& batch, const std::vector<double>& u,
                                   const std::vector<double>& v) {
  validate_batch(batch, "implicit_apply");
  if (u.size() != batch.x1.cols || v.size() != batch.x2.cols)
    throw validation_error("implicit_apply: vector length mismatch");
  const std::size_t n = batch.count();
  const std::size_t d3 = batch.x3.cols;
  const double dn = static_cast<double>(n);
  std::vector<double> coeff(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* r1 = &batch.x1.data[s * batch.x1.cols];
    const double* r2 = &batch.x2.data[s * batch.x2.cols];
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) a += r1[i] * u[i];
    for (std::size_t j = 0; j < v.size(); ++j) b += r2[j] * v[j];
    coeff[s] = a * b;
  }
  std::vector<double> out(d3);
  for (std::size_t l = 0; l < d3; ++l) {
    out[l] = detail::pairwise_sum([&](std::size_t s) { return coeff[s] * batch.x3(s, l); }, 0, n) /
             dn;
  }
  return out;
}

KruskalForm online_power_decompose(const TripleSampleBatch& batch, std::size_t k,
                                   const PowerConfig& cfg, MemoryAccounting* acct) {
  validate_batch(batch, "online_power_decompose");
  require_symmetric_batch(batch, "online_power_decompose");
  if (k < 1) throw validation_error("online_power_decompose: rank must be >= 1");
  if (cfg.deflation_rounds && cfg.deflation_rounds != k)
    throw validation_error("online_power_decompose: deflation_rounds disagrees with rank");
  const std::size_t restarts = cfg.restarts ? cfg.restarts : default_restarts(k);
  detail::validate_power_config(restarts, cfg.iterations, cfg.tol);

  const std::size_t d = batch.x1.cols;
  KruskalForm out{std::vector<double>(k), {Matrix(d, k), Matrix(d, k), Matrix(d, k)}};
  std::vector<double> lams;
  std::vector<std::vector<double>> vs;
  lams.reserve(k);
  vs.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    StreamOracle oracle{batch, lams, vs, acct};
    EigenPair pair =
        detail::extract_round(oracle, d, restarts, cfg.iterations, cfg.tol, cfg.seed, s, nullptr,
                              nullptr);
    detail::fold_sign(pair);
    if (acct) acct->on_alloc(d + 1);
    out.weights[s] = pair.eigenvalue;
    for (std::size_t m = 0; m < 3; ++m) out.factors[m].set_column(s, pair.eigenvector);
    lams.push_back(pair.eigenvalue);
    vs.push_back(std::move(pair.eigenvector));
  }
  if (acct) acct->on_free(k * (d + 1));
  return out;
}

Matrix stochastic_als_gradient(const Matrix& c, const TripleSample& sample, const Matrix& a,
                               const Matrix& b, const std::vector<double>& lambda,
                               std::size_t* flops) {
  const std::size_t k = a.cols;
  const std::size_t d1 = a.rows, d2 = b.rows, d3 = c.rows;
  if (b.cols != k || c.cols != k || lambda.size() != k)
    throw validation_error("stochastic_als_gradient: factor shapes disagree");
  if (sample.x1.size() != d1 || sample.x2.size() != d2 || sample.x3.size() != d3)
    throw validation_error("stochastic_als_gradient: sample dims disagree");

  std::size_t ops = 0;
  std::vector<double> alpha(k, 0.0), beta(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < d1; ++i) alpha[t] += a(i, t) * sample.x1[i];
    for (std::size_t j = 0; j < d2; ++j) beta[t] += b(j, t) * sample.x2[j];
  }
  ops += 2 * k * (d1 + d2);

  Matrix ga = gram(a);
  Matrix gb = gram(b);
  ops += 2 * k * k * (d1 + d2);

  Matrix grad(d3, k);
  for (std::size_t t = 0; t < k; ++t) {
    const double lt2 = 2.0 * lambda[t];
    for (std::size_t j = 0; j < k; ++j) {
      const double w = lambda[j] * ga(j, t) * gb(j, t);
      for (std::size_t r = 0; r < d3; ++r) grad(r, t) += w * c(r, j);
    }
    const double s = alpha[t] * beta[t];
    for (std::size_t r = 0; r < d3; ++r) grad(r, t) = lt2 * grad(r, t) - lt2 * (s * sample.x3[r]);
  }
  ops += k * k * (2 + 2 * d3) + k * (1 + 4 * d3);

  if (flops) *flops = ops;
  return grad;
}

}  // namespace cpd
