#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/matrix.hpp"
#include "cpd/power.hpp"
#include "cpd/rng.hpp"
#include "cpd/stream.hpp"
#include "cpd/tensor.hpp"

using namespace cpd;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 3, 3);
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.gaussian();
  return m;
}

Matrix random_unit_columns(std::size_t d, std::size_t k, std::uint64_t seed) {
  Matrix m = random_matrix(d, k, seed);
  for (std::size_t j = 0; j < k; ++j) m.set_column(j, normalized(m.column(j)));
  return m;
}

// T(u, v, I) on a materialized tensor, written as the obvious triple loop.
std::vector<double> dense_uvi(const DenseTensor& t, const std::vector<double>& u,
                              const std::vector<double>& v) {
  std::vector<double> out(t.dims[2], 0.0);
  for (std::size_t i = 0; i < t.dims[0]; ++i)
    for (std::size_t j = 0; j < t.dims[1]; ++j)
      for (std::size_t l = 0; l < t.dims[2]; ++l) out[l] += t(i, j, l) * u[i] * v[j];
  return out;
}

void check_bitwise_equal(const KruskalForm& lhs, const KruskalForm& rhs) {
  REQUIRE(lhs.weights.size() == rhs.weights.size());
  for (std::size_t s = 0; s < lhs.weights.size(); ++s) CHECK(lhs.weights[s] == rhs.weights[s]);
  REQUIRE(lhs.factors.size() == rhs.factors.size());
  for (std::size_t m = 0; m < lhs.factors.size(); ++m) {
    REQUIRE(lhs.factors[m].data.size() == rhs.factors[m].data.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < lhs.factors[m].data.size(); ++i)
      if (lhs.factors[m].data[i] != rhs.factors[m].data[i]) ++mismatches;
    CHECK(mismatches == 0);
  }
}

double squared_fro_diff(const DenseTensor& a, const DenseTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc;
}

// f(C, x) = ||sum_j lambda_j a_j (x) b_j (x) c_j  -  x1 (x) x2 (x) x3||_F^2
double sample_objective(const Matrix& c, const TripleSample& x, const Matrix& a, const Matrix& b,
                        const std::vector<double>& lambda) {
  DenseTensor model = kruskal_to_tensor(KruskalForm{lambda, {a, b, c}});
  DenseTensor s = outer_rank1(1.0, {x.x1, x.x2, x.x3});
  return squared_fro_diff(model, s);
}

}  // namespace

TEST_CASE("pairwise_sum: linear below the block size, split identity above") {
  std::vector<double> terms(100);
  Rng rng = Rng::stream(21, 0, 0);
  for (double& x : terms) x = rng.gaussian();
  auto f = [&](std::size_t s) { return terms[s]; };

  double linear = 0.0;
  for (std::size_t s = 0; s < 32; ++s) linear += terms[s];
  CHECK(detail::pairwise_sum(f, 0, 32) == linear);

  CHECK(detail::pairwise_sum(f, 0, 100) ==
        detail::pairwise_sum(f, 0, 50) + detail::pairwise_sum(f, 50, 100));

  double naive = 0.0;
  for (double x : terms) naive += x;
  CHECK(std::fabs(detail::pairwise_sum(f, 0, 100) - naive) < 1e-13);
}

TEST_CASE("empirical_tensor: single and repeated samples") {
  Matrix x1(1, 3), x2(1, 4), x3(1, 2);
  x1(0, 0) = 1.0;
  x2(0, 1) = 1.0;
  x3(0, 0) = 1.0;
  DenseTensor t = empirical_tensor(make_batch(x1, x2, x3));
  REQUIRE(t.dims == std::vector<std::size_t>({3, 4, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < 2; ++l)
        CHECK(t(i, j, l) == ((i == 0 && j == 1 && l == 0) ? 1.0 : 0.0));

  Matrix y1(2, 3), y2(2, 4), y3(2, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    y1(r, 0) = 1.0;
    y2(r, 1) = 1.0;
    y3(r, 0) = 1.0;
  }
  DenseTensor t2 = empirical_tensor(make_batch(y1, y2, y3));
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t2.data[i] == t.data[i]);
}

TEST_CASE("empirical_tensor: matches the naive loop, exactly under one block") {
  const std::size_t n = 20;
  TripleSampleBatch batch =
      make_batch(random_matrix(n, 3, 31), random_matrix(n, 4, 32), random_matrix(n, 2, 33));
  DenseTensor t = empirical_tensor(batch);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < 2; ++l) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s)
          acc += (batch.x1(s, i) * batch.x2(s, j)) * batch.x3(s, l);
        CHECK(t(i, j, l) == acc / static_cast<double>(n));
      }

  const std::size_t big = 100;
  TripleSampleBatch wide =
      make_batch(random_matrix(big, 3, 34), random_matrix(big, 4, 35), random_matrix(big, 2, 36));
  DenseTensor tw = empirical_tensor(wide);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < 2; ++l) {
        double acc = 0.0;
        for (std::size_t s = 0; s < big; ++s)
          acc += (wide.x1(s, i) * wide.x2(s, j)) * wide.x3(s, l);
        CHECK(tw(i, j, l) == doctest::Approx(acc / 100.0).epsilon(1e-13));
      }
}

TEST_CASE("implicit_apply: unit samples, annihilation, dense agreement, linearity") {
  Matrix x1(1, 3), x2(1, 3), x3(1, 3);
  x1(0, 0) = 1.0;
  x2(0, 1) = 1.0;
  x3(0, 2) = 1.0;
  TripleSampleBatch unit = make_batch(x1, x2, x3);
  std::vector<double> r = implicit_apply(unit, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0});
  CHECK(r == std::vector<double>({0.0, 0.0, 1.0}));

  const std::size_t n = 40;
  TripleSampleBatch batch =
      make_batch(random_matrix(n, 4, 41), random_matrix(n, 5, 42), random_matrix(n, 3, 43));

  // u orthogonal to every first-view sample
  {
    Matrix z1(n, 4);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < 3; ++i) z1(s, i) = batch.x1(s, i);  // last coordinate zero
    TripleSampleBatch flat = make_batch(z1, batch.x2, batch.x3);
    std::vector<double> zero = implicit_apply(flat, {0.0, 0.0, 0.0, 1.0}, {1, 1, 1, 1, 1});
    for (double v : zero) CHECK(v == 0.0);
  }

  DenseTensor t = empirical_tensor(batch);
  Rng rng = Rng::stream(44, 0, 0);
  std::vector<double> u = rng.gaussian_vec(4), v = rng.gaussian_vec(5);
  std::vector<double> fast = implicit_apply(batch, u, v);
  std::vector<double> slow = dense_uvi(t, u, v);
  for (std::size_t l = 0; l < 3; ++l) CHECK(fast[l] == doctest::Approx(slow[l]).epsilon(1e-12));

  // linearity in u
  std::vector<double> u2 = rng.gaussian_vec(4);
  std::vector<double> both(4);
  for (std::size_t i = 0; i < 4; ++i) both[i] = 2.5 * u[i] + u2[i];
  std::vector<double> lhs = implicit_apply(batch, both, v);
  std::vector<double> a1 = implicit_apply(batch, u, v);
  std::vector<double> a2 = implicit_apply(batch, u2, v);
  for (std::size_t l = 0; l < 3; ++l)
    CHECK(lhs[l] == doctest::Approx(2.5 * a1[l] + a2[l]).epsilon(1e-12));

  CHECK_THROWS_AS((void)implicit_apply(batch, {1.0}, v), validation_error);
}

TEST_CASE("online_power_decompose: bitwise equal to the dense path") {
  const std::size_t d = 8, n = 200, k = 3;
  TripleSampleBatch batch = make_batch(random_matrix(n, d, 51));
  PowerConfig cfg;
  cfg.restarts = 12;
  cfg.iterations = 30;
  cfg.tol = 1e-10;
  cfg.seed = 7;

  auto [dense, report] = decompose_orthogonal(empirical_tensor(batch), k, cfg);
  KruskalForm online = online_power_decompose(batch, k, cfg);
  check_bitwise_equal(dense, online);

  KruskalForm again = online_power_decompose(batch, k, cfg);
  check_bitwise_equal(online, again);
}

TEST_CASE("online_power_decompose: batch of copies of one vector") {
  const std::size_t d = 5, n = 10;
  Rng rng = Rng::stream(52, 0, 0);
  std::vector<double> x = normalized(rng.gaussian_vec(d));
  Matrix rows(n, d);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) rows(s, i) = x[i];
  PowerConfig cfg;
  cfg.restarts = 8;
  cfg.iterations = 40;
  KruskalForm kf = online_power_decompose(make_batch(rows), 1, cfg);
  CHECK(kf.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(dot(kf.factors[0].column(0), x)) == doctest::Approx(1.0).epsilon(1e-12));

  // scaled copies: weight is the cubed length
  const double s = 1.3;
  Matrix scaled = rows;
  for (double& v : scaled.data) v *= s;
  KruskalForm kfs = online_power_decompose(make_batch(scaled), 1, cfg);
  CHECK(kfs.weights[0] == doctest::Approx(s * s * s).epsilon(1e-12));
}

TEST_CASE("online_power_decompose: memory stays near n*d + d^2") {
  const std::size_t d = 32, n = 20, k = 2;
  TripleSampleBatch batch = make_batch(random_matrix(n, d, 53));
  PowerConfig cfg;
  cfg.restarts = 6;
  cfg.iterations = 15;
  cfg.tol = 1e-10;
  MemoryAccounting acct;
  (void)online_power_decompose(batch, k, cfg, &acct);
  CHECK(acct.peak_doubles <= 2 * (n * d + d * d));
  CHECK(acct.peak_doubles * 8 < d * d * d);  // far from materializing d^3
  CHECK(acct.current_doubles == 0);

  const std::size_t d2 = 8, n2 = 200;
  TripleSampleBatch batch2 = make_batch(random_matrix(n2, d2, 54));
  MemoryAccounting acct2;
  (void)online_power_decompose(batch2, 3, cfg, &acct2);
  CHECK(acct2.peak_doubles <= 2 * (n2 * d2 + d2 * d2));
}

TEST_CASE("online_power_decompose: symmetry gate mirrors the dense one") {
  // a batch closed under view permutation has a symmetric empirical tensor
  const std::size_t d = 4;
  Rng rng = Rng::stream(55, 0, 0);
  std::vector<double> a = rng.gaussian_vec(d), b = rng.gaussian_vec(d), c = rng.gaussian_vec(d);
  const std::vector<double>* perms[6][3] = {{&a, &b, &c}, {&a, &c, &b}, {&b, &a, &c},
                                            {&b, &c, &a}, {&c, &a, &b}, {&c, &b, &a}};
  Matrix x1(6, d), x2(6, d), x3(6, d);
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t i = 0; i < d; ++i) {
      x1(s, i) = (*perms[s][0])[i];
      x2(s, i) = (*perms[s][1])[i];
      x3(s, i) = (*perms[s][2])[i];
    }
  TripleSampleBatch symmetrized = make_batch(x1, x2, x3);
  PowerConfig cfg;
  cfg.restarts = 6;
  cfg.iterations = 25;
  auto [dense, report] = decompose_orthogonal(empirical_tensor(symmetrized), 1, cfg);
  KruskalForm online = online_power_decompose(symmetrized, 1, cfg);
  check_bitwise_equal(dense, online);

  // one lopsided sample is rejected by both paths
  TripleSampleBatch crooked = make_batch(random_matrix(3, d, 56), random_matrix(3, d, 57),
                                         random_matrix(3, d, 58));
  CHECK_THROWS_AS((void)online_power_decompose(crooked, 1, cfg), validation_error);
  CHECK_THROWS_AS((void)decompose_orthogonal(empirical_tensor(crooked), 1, cfg),
                  validation_error);

  // non-cubic views cannot claim symmetry
  TripleSampleBatch rect = make_batch(random_matrix(3, 2, 59), random_matrix(3, 2, 60),
                                      random_matrix(3, 4, 61));
  CHECK_THROWS_AS((void)online_power_decompose(rect, 1, cfg), validation_error);
}

TEST_CASE("batch plumbing: construction, adapters, bounds") {
  CHECK_THROWS_AS((void)make_batch(Matrix(2, 3), Matrix(3, 3), Matrix(2, 3)), validation_error);
  CHECK_THROWS_AS((void)make_batch(Matrix(0, 3), Matrix(0, 3), Matrix(0, 3)), validation_error);

  DenseTensor flat({4, 3});
  for (std::size_t i = 0; i < flat.size(); ++i) flat.data[i] = static_cast<double>(i);
  Matrix m = view_matrix(flat);
  CHECK(m.rows == 4);
  CHECK(m.cols == 3);
  CHECK(m(1, 2) == 5.0);
  DenseTensor cube({2, 2, 2});
  CHECK_THROWS_AS((void)view_matrix(cube), validation_error);

  TripleSampleBatch batch =
      make_batch(random_matrix(5, 2, 62), random_matrix(5, 3, 63), random_matrix(5, 4, 64));
  TripleSample s = sample_at(batch, 4);
  CHECK(s.x1.size() == 2);
  CHECK(s.x2.size() == 3);
  CHECK(s.x3.size() == 4);
  CHECK(s.x3[1] == batch.x3(4, 1));
  CHECK_THROWS_AS((void)sample_at(batch, 5), validation_error);
}

TEST_CASE("stochastic_als_gradient: zero weights, stationarity, cost") {
  const std::size_t d1 = 5, d2 = 4, d3 = 3, k = 3;
  Matrix a = random_unit_columns(d1, k, 71);
  Matrix b = random_unit_columns(d2, k, 72);
  Matrix c = random_unit_columns(d3, k, 73);
  Rng rng = Rng::stream(74, 0, 0);
  std::vector<double> lambda(k);
  for (double& v : lambda) v = 1.0 + rng.uniform01();

  // batch whose empirical tensor equals the model exactly
  Matrix x1(k, d1), x2(k, d2), x3(k, d3);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < d1; ++i) x1(j, i) = static_cast<double>(k) * lambda[j] * a(i, j);
    for (std::size_t i = 0; i < d2; ++i) x2(j, i) = b(i, j);
    for (std::size_t i = 0; i < d3; ++i) x3(j, i) = c(i, j);
  }
  TripleSampleBatch batch = make_batch(x1, x2, x3);

  Matrix avg(d3, k);
  for (std::size_t s = 0; s < k; ++s) {
    Matrix g = stochastic_als_gradient(c, sample_at(batch, s), a, b, lambda);
    for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += g.data[i] / 3.0;
  }
  CHECK(frobenius(avg) <= 1e-8);

  std::vector<double> zeros(k, 0.0);
  std::size_t flops = 0;
  Matrix gz = stochastic_als_gradient(c, sample_at(batch, 0), a, b, zeros, &flops);
  CHECK(max_abs(gz) == 0.0);
  CHECK(flops > 0);
  CHECK(flops <= 8 * k * k * (d1 + d2 + d3) + 64);

  CHECK_THROWS_AS((void)stochastic_als_gradient(c, sample_at(batch, 0), a, random_matrix(d2, 2, 75),
                                                lambda),
                  validation_error);
}

TEST_CASE("stochastic_als_gradient: central finite differences") {
  const std::size_t d1 = 4, d2 = 3, d3 = 5, k = 3;
  Matrix a = random_matrix(d1, k, 81);
  Matrix b = random_matrix(d2, k, 82);
  Matrix c = random_matrix(d3, k, 83);
  Rng rng = Rng::stream(84, 0, 0);
  std::vector<double> lambda(k);
  for (double& v : lambda) v = 0.5 + rng.uniform01();
  TripleSample x{rng.gaussian_vec(d1), rng.gaussian_vec(d2), rng.gaussian_vec(d3)};

  Matrix grad = stochastic_als_gradient(c, x, a, b, lambda);
  const double h = 1e-6;
  for (std::size_t r = 0; r < d3; ++r)
    for (std::size_t t = 0; t < k; ++t) {
      Matrix cp = c, cm = c;
      cp(r, t) += h;
      cm(r, t) -= h;
      const double fd =
          (sample_objective(cp, x, a, b, lambda) - sample_objective(cm, x, a, b, lambda)) /
          (2.0 * h);
      CHECK(grad(r, t) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("averaged per-sample objective differs from the batch residual by a constant") {
  const std::size_t d1 = 3, d2 = 4, d3 = 2, k = 2, n = 10;
  Matrix a = random_unit_columns(d1, k, 91);
  Matrix b = random_unit_columns(d2, k, 92);
  Rng rng = Rng::stream(93, 0, 0);
  std::vector<double> lambda(k);
  for (double& v : lambda) v = 1.0 + rng.uniform01();
  TripleSampleBatch batch =
      make_batch(random_matrix(n, d1, 94), random_matrix(n, d2, 95), random_matrix(n, d3, 96));
  DenseTensor that = empirical_tensor(batch);

  double first_offset = 0.0;
  for (std::size_t trial = 0; trial < 5; ++trial) {
    Matrix c = random_matrix(d3, k, 97 + trial);
    double avg = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      avg += sample_objective(c, sample_at(batch, s), a, b, lambda) / static_cast<double>(n);
    DenseTensor model = kruskal_to_tensor(KruskalForm{lambda, {a, b, c}});
    const double direct = squared_fro_diff(model, that);
    const double offset = avg - direct;
    if (trial == 0) {
      first_offset = offset;
    } else {
      CHECK(offset == doctest::Approx(first_offset).epsilon(1e-8));
    }
  }
}
