#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/matrix.hpp"
#include "cpd/models.hpp"
#include "cpd/power.hpp"
#include "cpd/rng.hpp"
#include "cpd/stream.hpp"
#include "cpd/tensor.hpp"

using namespace cpd;

namespace {

Matrix from_columns(std::size_t d, const std::vector<std::vector<double>>& cols) {
  Matrix m(d, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) m.set_column(j, cols[j]);
  return m;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 3, 9);
  Matrix m(r, c);
  for (double& x : m.data) x = rng.gaussian();
  return m;
}

// Sum_j w_j mu_j mu_j^T from the columns of `cols`.
Matrix outer_sum(const Matrix& cols, const std::vector<double>& w) {
  Matrix m(cols.rows, cols.rows);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const std::vector<double> a = cols.column(j);
    for (std::size_t i = 0; i < cols.rows; ++i) {
      for (std::size_t l = 0; l < cols.rows; ++l) m(i, l) += w[j] * a[i] * a[l];
    }
  }
  return m;
}

// Sum_j w_j mu_j^{(x)3}.
DenseTensor cube_sum(const Matrix& cols, const std::vector<double>& w) {
  const std::size_t d = cols.rows;
  DenseTensor t({d, d, d});
  for (std::size_t j = 0; j < w.size(); ++j) {
    const std::vector<double> a = cols.column(j);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t p = 0; p < d; ++p) {
        for (std::size_t l = 0; l < d; ++l) t(i, p, l) += w[j] * a[i] * a[p] * a[l];
      }
    }
  }
  return t;
}

// Sum_j w_j mu_j^{(x)4}.
DenseTensor quad_sum(const Matrix& cols, const std::vector<double>& w) {
  const std::size_t d = cols.rows;
  DenseTensor t({d, d, d, d});
  for (std::size_t j = 0; j < w.size(); ++j) {
    const std::vector<double> a = cols.column(j);
    for (std::size_t i1 = 0; i1 < d; ++i1) {
      for (std::size_t i2 = 0; i2 < d; ++i2) {
        for (std::size_t i3 = 0; i3 < d; ++i3) {
          for (std::size_t i4 = 0; i4 < d; ++i4) {
            t.at({i1, i2, i3, i4}) += w[j] * a[i1] * a[i2] * a[i3] * a[i4];
          }
        }
      }
    }
  }
  return t;
}

double frob_diff(const DenseTensor& a, const DenseTensor& b) {
  REQUIRE(a.dims == b.dims);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_diff(const DenseTensor& a, const DenseTensor& b) {
  REQUIRE(a.dims == b.dims);
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  }
  return m;
}

std::vector<double> get_row(const Matrix& m, std::size_t i) {
  std::vector<double> r(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) r[j] = m(i, j);
  return r;
}

double vec_dist(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

// Greedy matching of estimate columns to reference columns by distance.
std::vector<std::size_t> match_columns(const Matrix& ref, const Matrix& est) {
  const std::size_t k = ref.cols;
  std::vector<std::size_t> pick(k);
  std::vector<bool> used(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    double best = 0.0;
    std::size_t arg = k;
    for (std::size_t p = 0; p < k; ++p) {
      if (used[p]) continue;
      const double dist = vec_dist(ref.column(j), est.column(p));
      if (arg == k || dist < best) {
        best = dist;
        arg = p;
      }
    }
    used[arg] = true;
    pick[j] = arg;
  }
  return pick;
}

struct RawMoments {
  std::vector<double> mean;
  Matrix second;
  DenseTensor third;
};

// Closed-form raw moments E[x], E[x (x) x], E[x^{(x)3}] of a spherical
// Gaussian mixture, built independently of the library code.
RawMoments gaussian_mixture_raw(const Matrix& means, const std::vector<double>& w,
                                const std::vector<double>& sigmas) {
  const std::size_t d = means.rows;
  const std::size_t k = w.size();
  RawMoments raw;
  raw.mean.assign(d, 0.0);
  raw.second = Matrix(d, d);
  raw.third = DenseTensor({d, d, d});
  for (std::size_t h = 0; h < k; ++h) {
    const std::vector<double> mu = means.column(h);
    const double s2 = sigmas[h] * sigmas[h];
    for (std::size_t i = 0; i < d; ++i) raw.mean[i] += w[h] * mu[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        raw.second(i, j) += w[h] * (mu[i] * mu[j] + (i == j ? s2 : 0.0));
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t l = 0; l < d; ++l) {
          double v = mu[i] * mu[j] * mu[l];
          if (j == l) v += s2 * mu[i];
          if (i == l) v += s2 * mu[j];
          if (i == j) v += s2 * mu[l];
          raw.third(i, j, l) += w[h] * v;
        }
      }
    }
  }
  return raw;
}

// Raw word moments of a Dirichlet topic mixture from the closed-form
// moments E[h_i], E[h_i h_j], E[h_i h_j h_l] of Dirichlet(alpha).
RawMoments dirichlet_word_raw(const Matrix& topics, const std::vector<double>& alpha) {
  const std::size_t d = topics.rows;
  const std::size_t k = alpha.size();
  double a0 = 0.0;
  for (double a : alpha) a0 += a;
  RawMoments raw;
  raw.mean.assign(d, 0.0);
  raw.second = Matrix(d, d);
  raw.third = DenseTensor({d, d, d});
  auto ehh = [&](std::size_t i, std::size_t j) {
    return alpha[i] * (alpha[j] + (i == j ? 1.0 : 0.0)) / (a0 * (a0 + 1.0));
  };
  auto ehhh = [&](std::size_t i, std::size_t j, std::size_t l) {
    const double fj = alpha[j] + (j == i ? 1.0 : 0.0);
    const double fl = alpha[l] + (l == i ? 1.0 : 0.0) + (l == j ? 1.0 : 0.0);
    return alpha[i] * fj * fl / (a0 * (a0 + 1.0) * (a0 + 2.0));
  };
  for (std::size_t t = 0; t < k; ++t) {
    const std::vector<double> mu = topics.column(t);
    for (std::size_t a = 0; a < d; ++a) raw.mean[a] += alpha[t] / a0 * mu[a];
  }
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t u = 0; u < k; ++u) {
      const double e2 = ehh(t, u);
      const std::vector<double> mt = topics.column(t);
      const std::vector<double> mu = topics.column(u);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) raw.second(a, b) += e2 * mt[a] * mu[b];
      }
      for (std::size_t v = 0; v < k; ++v) {
        const double e3 = ehhh(t, u, v);
        const std::vector<double> mv = topics.column(v);
        for (std::size_t a = 0; a < d; ++a) {
          for (std::size_t b = 0; b < d; ++b) {
            for (std::size_t c = 0; c < d; ++c) {
              raw.third(a, b, c) += e3 * mt[a] * mu[b] * mv[c];
            }
          }
        }
      }
    }
  }
  return raw;
}

// P(all coordinates in S stay 0) by brute-force enumeration over the 2^k
// parent configurations; S must hold distinct indices.
double absent_prob_enum(const Matrix& w, double rho, const std::vector<std::size_t>& s) {
  const std::size_t k = w.cols;
  double total = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    double p = 1.0;
    double load = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if ((mask >> j) & 1U) {
        p *= rho;
        for (std::size_t i : s) load += w(i, j);
      } else {
        p *= 1.0 - rho;
      }
    }
    total += p * std::exp(-load);
  }
  return total;
}

TopicSpec small_topic_spec() {
  TopicSpec spec;
  spec.weights = {0.4, 0.6};
  spec.topics = from_columns(5, {{0.4, 0.3, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.2, 0.3, 0.3}});
  return spec;
}

}  // namespace

TEST_CASE("topic population moments: pinned degenerate mixtures") {
  // Single component: every moment is an outer power of the one topic.
  TopicSpec one;
  one.weights = {1.0};
  one.topics = from_columns(3, {{0.2, 0.3, 0.5}});
  const MomentSet ms = topic_population_moments(one);
  CHECK(ms.family == ModelFamily::topic);
  CHECK(ms.d == 3);
  CHECK(ms.k == 1);
  const std::vector<double> mu = {0.2, 0.3, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(ms.m1[i] - mu[i]) <= 1e-15);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::fabs(ms.m2(i, j) - mu[i] * mu[j]) <= 1e-15);
      for (std::size_t l = 0; l < 3; ++l) {
        CHECK(std::fabs(ms.m3(i, j, l) - mu[i] * mu[j] * mu[l]) <= 1e-15);
      }
    }
  }

  // Orthogonal unit topics expose the weights on the diagonal.
  TopicSpec two;
  two.weights = {0.5, 0.5};
  two.topics = from_columns(2, {{1.0, 0.0}, {0.0, 1.0}});
  const MomentSet basis = topic_population_moments(two);
  CHECK(basis.m2(0, 0) == 0.5);
  CHECK(basis.m2(1, 1) == 0.5);
  CHECK(basis.m2(0, 1) == 0.0);
  CHECK(basis.m3(0, 0, 0) == 0.5);
  CHECK(basis.m3(1, 1, 1) == 0.5);
  CHECK(basis.m3(0, 1, 1) == 0.0);
  CHECK(basis.m3(1, 0, 1) == 0.0);

  TopicSpec bad = two;
  bad.weights = {0.5, 0.4};
  CHECK_THROWS_AS((void)topic_population_moments(bad), validation_error);
  bad = two;
  bad.topics(0, 0) = 0.9;  // column no longer sums to one
  CHECK_THROWS_AS((void)topic_population_moments(bad), validation_error);
  bad = two;
  bad.topics(0, 0) = -1.0;
  bad.topics(1, 0) = 2.0;
  CHECK_THROWS_AS((void)topic_population_moments(bad), validation_error);
  bad = two;
  bad.weights = {0.5, 0.25, 0.25};
  CHECK_THROWS_AS((void)topic_population_moments(bad), validation_error);
}

TEST_CASE("topic empirical moments: pinned counts and positional estimator") {
  const std::vector<std::vector<int>> docs = {{0, 1, 2}, {1, 0, 2}};
  const MomentSet ms = topic_empirical_moments(docs, 3);
  CHECK(ms.m3.at({0, 1, 2}) == 0.5);
  CHECK(ms.m3.at({1, 0, 2}) == 0.5);
  CHECK(ms.m3.at({0, 0, 0}) == 0.0);
  CHECK(ms.m3.at({2, 1, 0}) == 0.0);
  CHECK(ms.m2(0, 1) == 0.5);
  CHECK(ms.m2(1, 0) == 0.5);
  CHECK(ms.m2(0, 0) == 0.0);
  CHECK(ms.m1[0] == 0.5);
  CHECK(ms.m1[1] == 0.5);
  CHECK(ms.m1[2] == 0.0);

  // Alternate positions read the words in the requested order.
  const MomentSet shifted = topic_empirical_moments(docs, 3, {2, 0, 1});
  CHECK(shifted.m3.at({2, 0, 1}) == 0.5);
  CHECK(shifted.m3.at({2, 1, 0}) == 0.5);
  CHECK(shifted.m1[2] == 1.0);

  // Words past the used positions are ignored.
  const std::vector<std::vector<int>> longer = {{0, 1, 2, 2, 2}};
  CHECK(topic_empirical_moments(longer, 3).m3.at({0, 1, 2}) == 1.0);

  CHECK_THROWS_AS((void)topic_empirical_moments({}, 3), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments({{0, 1}}, 3), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments({{0, 1, 5}}, 3), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments({{0, 1, -1}}, 3), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments(docs, 3, {0, 0, 1}), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments(docs, 3, {0, 1, 5}), validation_error);
  CHECK_THROWS_AS((void)topic_empirical_moments(docs, 0), validation_error);
}

TEST_CASE("topic empirical moments converge to the population tensor") {
  TopicSpec spec;
  spec.weights = {0.5, 0.3, 0.2};
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < 3; ++j) {
    Rng rng = Rng::stream(7, j, 0);
    cols.push_back(rng.dirichlet(std::vector<double>(10, 1.0)));
  }
  spec.topics = from_columns(10, cols);

  const MomentSet pop = topic_population_moments(spec);
  const auto docs = sample_topic(spec, 100000, 3, 2026);
  REQUIRE(docs.size() == 100000);
  const MomentSet emp = topic_empirical_moments(docs, 10);
  CHECK(frob_diff(emp.m3, pop.m3) <= 0.02);
  CHECK(max_abs_diff(emp.m2, pop.m2) <= 0.01);
  double m1_err = 0.0;
  for (std::size_t i = 0; i < 10; ++i) m1_err = std::max(m1_err, std::fabs(emp.m1[i] - pop.m1[i]));
  CHECK(m1_err <= 0.01);
}

TEST_CASE("disjoint word positions give agreeing estimators") {
  TopicSpec spec;
  spec.weights = {0.3, 0.7};
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < 2; ++j) {
    Rng rng = Rng::stream(11, j, 4);
    cols.push_back(rng.dirichlet(std::vector<double>(6, 1.0)));
  }
  spec.topics = from_columns(6, cols);

  const auto docs = sample_topic(spec, 30000, 6, 501);
  const MomentSet front = topic_empirical_moments(docs, 6, {0, 1, 2});
  const MomentSet back = topic_empirical_moments(docs, 6, {3, 4, 5});
  const MomentSet pop = topic_population_moments(spec);
  // Any distinct positions estimate the same tensor; two disjoint triples
  // may differ only by sampling noise.
  CHECK(frob_diff(front.m3, back.m3) <= 0.05);
  CHECK(frob_diff(front.m3, pop.m3) <= 0.04);
  CHECK(frob_diff(back.m3, pop.m3) <= 0.04);
}

TEST_CASE("corpus io: round trip and malformed input") {
  const std::vector<std::vector<int>> docs = {{0, 1, 2}, {5, 3, 4, 9}, {7, 7, 7}};
  std::ostringstream out;
  write_corpus(out, docs);
  std::istringstream in(out.str());
  CHECK(parse_corpus(in) == docs);

  std::istringstream blanks(" 0 1 2 \n\n4 5 6\n\n");
  const auto parsed = parse_corpus(blanks);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == std::vector<int>{0, 1, 2});
  CHECK(parsed[1] == std::vector<int>{4, 5, 6});

  std::istringstream empty("");
  CHECK(parse_corpus(empty).empty());

  std::istringstream bad1("0 x 2\n");
  CHECK_THROWS_AS((void)parse_corpus(bad1), validation_error);
  std::istringstream bad2("0 -2 3\n");
  CHECK_THROWS_AS((void)parse_corpus(bad2), validation_error);
  std::istringstream bad3("1.5 2 3\n");
  CHECK_THROWS_AS((void)parse_corpus(bad3), validation_error);
}

TEST_CASE("gmm shared covariance: corrections recover the mixture moments exactly") {
  const std::vector<double> w = {0.4, 0.6};
  const Matrix means = from_columns(4, {{1.0, -0.5, 0.3, 0.8}, {-0.7, 0.9, 0.2, -0.4}});
  const RawMoments raw = gaussian_mixture_raw(means, w, {0.3, 0.3});

  const MomentSet ms = gmm_common_from_raw(raw.mean, raw.second, raw.third);
  CHECK(ms.family == ModelFamily::gmm);
  CHECK(ms.d == 4);
  // The between-component scatter has rank k-1 < d, so the smallest
  // covariance eigenvalue is the shared variance itself.
  CHECK(std::fabs(ms.sigma_sq - 0.09) <= 1e-12);
  CHECK(max_abs_diff(ms.m2, outer_sum(means, w)) <= 1e-10);
  CHECK(max_diff(ms.m3, cube_sum(means, w)) <= 1e-10);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::fabs(ms.m1[i] - 0.09 * raw.mean[i]) <= 1e-12);
  }

  // Single component: no scatter at all, M2 collapses to mu mu^T.
  const Matrix mu1 = from_columns(3, {{0.1, -0.4, 0.7}});
  const RawMoments raw1 = gaussian_mixture_raw(mu1, {1.0}, {0.5});
  const MomentSet one = gmm_common_from_raw(raw1.mean, raw1.second, raw1.third);
  CHECK(std::fabs(one.sigma_sq - 0.25) <= 1e-12);
  CHECK(max_abs_diff(one.m2, outer_sum(mu1, {1.0})) <= 1e-10);
  CHECK(max_diff(one.m3, cube_sum(mu1, {1.0})) <= 1e-10);

  CHECK_THROWS_AS((void)gmm_common_from_raw({0.0, 0.0}, Matrix(3, 3), DenseTensor({3, 3, 3})),
                  validation_error);
  CHECK_THROWS_AS((void)gmm_common_from_raw(raw.mean, raw.second, DenseTensor({4, 4})),
                  validation_error);
  CHECK_THROWS_AS((void)gmm_common_moments(Matrix(1, 4)), validation_error);
}

TEST_CASE("gmm shared covariance: sampled end-to-end mean recovery") {
  GmmSpec spec;
  spec.weights = {0.45, 0.55};
  Matrix means(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    means(i, 0) = i < 5 ? 0.8 : -0.2;
    means(i, 1) = (i % 2 != 0) ? 0.9 : -0.3;
  }
  spec.means = means;
  spec.sigmas = {0.2};

  const Matrix samples = sample_gmm(spec, 200000, 91);
  REQUIRE(samples.rows == 200000);
  const MomentSet ms = gmm_common_moments(samples);
  CHECK(std::fabs(ms.sigma_sq - 0.04) <= 0.01);

  const MixtureEstimate est = learn_mixture(ms, 2);
  REQUIRE(est.means.cols == 2);
  const auto pick = match_columns(means, est.means);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(vec_dist(means.column(j), est.means.column(pick[j])) <= 0.1);
    CHECK(std::fabs(spec.weights[j] - est.weights[pick[j]]) <= 0.05);
  }
}

TEST_CASE("gmm differing covariances: first-order term and exact corrections") {
  const std::vector<double> w = {0.3, 0.7};
  const std::vector<double> sig = {0.2, 0.5};
  const Matrix means = from_columns(5, {{0.6, -0.2, 0.9, 0.1, -0.5}, {-0.3, 0.8, 0.4, -0.7, 0.2}});
  const RawMoments raw = gaussian_mixture_raw(means, w, sig);

  const MomentSet ms = gmm_differing_from_raw(raw.mean, raw.second, raw.third);
  const double avg_var = 0.3 * 0.04 + 0.7 * 0.25;
  CHECK(std::fabs(ms.sigma_sq - avg_var) <= 1e-12);
  // m1 realizes the variance-weighted mean combination regardless of which
  // eigenvector the solver picks inside the flat eigenvalue block.
  for (std::size_t i = 0; i < 5; ++i) {
    const double want = w[0] * 0.04 * means(i, 0) + w[1] * 0.25 * means(i, 1);
    CHECK(std::fabs(ms.m1[i] - want) <= 1e-10);
  }
  CHECK(max_abs_diff(ms.m2, outer_sum(means, w)) <= 1e-10);
  CHECK(max_diff(ms.m3, cube_sum(means, w)) <= 1e-10);

  const Matrix mu1 = from_columns(3, {{0.4, 0.2, -0.6}});
  const RawMoments raw1 = gaussian_mixture_raw(mu1, {1.0}, {0.3});
  const MomentSet one = gmm_differing_from_raw(raw1.mean, raw1.second, raw1.third);
  CHECK(max_abs_diff(one.m2, outer_sum(mu1, {1.0})) <= 1e-10);
  CHECK_THROWS_AS((void)gmm_differing_moments(Matrix(1, 3)), validation_error);
}

TEST_CASE("gmm differing covariances reduce to the shared form when variances agree") {
  const std::vector<double> w = {0.3, 0.7};
  const Matrix means = from_columns(5, {{0.6, -0.2, 0.9, 0.1, -0.5}, {-0.3, 0.8, 0.4, -0.7, 0.2}});
  const RawMoments raw = gaussian_mixture_raw(means, w, {0.3, 0.3});
  const MomentSet common = gmm_common_from_raw(raw.mean, raw.second, raw.third);
  const MomentSet diff = gmm_differing_from_raw(raw.mean, raw.second, raw.third);
  CHECK(std::fabs(common.sigma_sq - diff.sigma_sq) <= 1e-12);
  double m1_gap = 0.0;
  for (std::size_t i = 0; i < 5; ++i) m1_gap = std::max(m1_gap, std::fabs(common.m1[i] - diff.m1[i]));
  CHECK(m1_gap <= 1e-12);
  CHECK(max_abs_diff(common.m2, diff.m2) <= 1e-12);
  CHECK(max_diff(common.m3, diff.m3) <= 1e-12);
}

TEST_CASE("gmm coordinate split: rotation invariants") {
  GmmSpec spec;
  spec.weights = {0.25, 0.35, 0.4};
  spec.means = random_matrix(12, 3, 33);
  spec.sigmas = {0.3};
  const Matrix samples = sample_gmm(spec, 200, 4);

  const SplitBatch split = gmm_multiview_split(samples, 5);
  CHECK(split.rotation.rows == 12);
  CHECK(split.rotation.cols == 12);
  const Matrix gram_r = matmul(transpose(split.rotation), split.rotation);
  CHECK(max_abs_diff(gram_r, Matrix::identity(12)) <= 1e-12);
  CHECK(split.views.x1.cols == 4);
  CHECK(split.views.x2.cols == 4);
  CHECK(split.views.x3.cols == 4);
  CHECK(split.views.count() == 200);

  // Rotations preserve norms, and the views are exactly the rotated blocks.
  for (std::size_t s = 0; s < 5; ++s) {
    const std::vector<double> x = get_row(samples, s);
    std::vector<double> y = get_row(split.views.x1, s);
    const std::vector<double> y2 = get_row(split.views.x2, s);
    const std::vector<double> y3 = get_row(split.views.x3, s);
    y.insert(y.end(), y2.begin(), y2.end());
    y.insert(y.end(), y3.begin(), y3.end());
    CHECK(std::fabs(norm2(x) - norm2(y)) <= 1e-10);
    const std::vector<double> rx = matvec(split.rotation, x);
    CHECK(vec_dist(rx, y) <= 1e-12);
  }

  // Uneven dimensions spread the remainder over the leading views.
  const SplitBatch odd = gmm_multiview_split(random_matrix(10, 13, 9), 6);
  CHECK(odd.views.x1.cols == 5);
  CHECK(odd.views.x2.cols == 4);
  CHECK(odd.views.x3.cols == 4);

  const SplitBatch again = gmm_multiview_split(samples, 5);
  CHECK(max_abs_diff(again.rotation, split.rotation) == 0.0);
  CHECK(max_abs_diff(again.views.x2, split.views.x2) == 0.0);
  const SplitBatch other = gmm_multiview_split(samples, 6);
  CHECK(max_abs_diff(other.rotation, split.rotation) > 1e-3);

  CHECK_THROWS_AS((void)gmm_multiview_split(Matrix(5, 2), 1), validation_error);
}

TEST_CASE("gmm coordinate split: end-to-end mean recovery") {
  GmmSpec spec;
  spec.weights = {0.25, 0.35, 0.4};
  spec.means = random_matrix(12, 3, 33);
  spec.sigmas = {0.3};
  const Matrix samples = sample_gmm(spec, 200000, 77);
  const SplitBatch split = gmm_multiview_split(samples, 5);
  const MixtureEstimate est = recover_split_means(split, 3);
  REQUIRE(est.means.rows == 12);
  REQUIRE(est.means.cols == 3);
  const auto pick = match_columns(spec.means, est.means);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(vec_dist(spec.means.column(j), est.means.column(pick[j])) <= 0.1);
    CHECK(std::fabs(spec.weights[j] - est.weights[pick[j]]) <= 0.05);
  }
}

TEST_CASE("ica cumulant: exact enumeration over sign patterns") {
  // Scaled Hadamard mixing: orthonormal columns with entries +-1/2, so the
  // sixteen sign-pattern samples produce exact dyadic moments.
  const Matrix a = from_columns(4, {{0.5, 0.5, 0.5, 0.5},
                                    {0.5, -0.5, 0.5, -0.5},
                                    {0.5, 0.5, -0.5, -0.5},
                                    {0.5, -0.5, -0.5, 0.5}});
  CHECK(max_abs_diff(gram(a), Matrix::identity(4)) == 0.0);

  Matrix samples(16, 4);
  for (std::size_t mask = 0; mask < 16; ++mask) {
    for (std::size_t i = 0; i < 4; ++i) {
      double x = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        x += a(i, j) * (((mask >> j) & 1U) != 0 ? 1.0 : -1.0);
      }
      samples(mask, i) = x;
    }
  }

  const MomentSet ms = ica_cumulant(samples);
  CHECK(ms.family == ModelFamily::ica);
  REQUIRE(ms.m3.order() == 4);
  CHECK(max_abs_diff(ms.m2, Matrix::identity(4)) <= 1e-12);
  // Sign sources have fourth moment 1, so each component carries weight -2.
  const DenseTensor target = quad_sum(a, {-2.0, -2.0, -2.0, -2.0});
  CHECK(max_diff(ms.m3, target) <= 1e-10);

  IcaSpec spec;
  spec.mixing = a;
  spec.kurtoses = {-2.0, -2.0, -2.0, -2.0};
  const MomentSet pop = ica_population_moments(spec);
  CHECK(max_diff(pop.m3, target) <= 1e-12);
  CHECK(max_abs_diff(pop.m2, Matrix::identity(4)) <= 1e-12);

  spec.kurtoses[2] = -2.5;  // below the attainable floor
  CHECK_THROWS_AS((void)ica_population_moments(spec), validation_error);
  spec.kurtoses = {-2.0, -2.0};
  CHECK_THROWS_AS((void)ica_population_moments(spec), validation_error);
  CHECK_THROWS_AS((void)ica_cumulant(Matrix(1, 4)), validation_error);
}

TEST_CASE("ica cumulant vanishes on pure gaussian data") {
  Rng rng = Rng::stream(17, 0, 0);
  Matrix x(20000, 3);
  for (double& v : x.data) v = rng.gaussian();
  const MomentSet ms = ica_cumulant(x);
  CHECK(frobenius_norm(ms.m3) <= 5.0 * 9.0 / std::sqrt(20000.0));
}

TEST_CASE("ica contractions match direct summation") {
  const Matrix a = from_columns(4, {{0.5, 0.5, 0.5, 0.5},
                                    {0.5, -0.5, 0.5, -0.5},
                                    {0.5, 0.5, -0.5, -0.5},
                                    {0.5, -0.5, -0.5, 0.5}});
  IcaSpec spec;
  spec.mixing = a;
  spec.kurtoses = {-2.0, 1.5, 0.7, -1.0};
  const MomentSet ms = ica_population_moments(spec);

  const std::vector<double> u = {0.3, -0.1, 0.7, 0.2};
  const std::vector<double> v = {0.5, 0.4, -0.6, 0.1};
  const Matrix pair = cumulant_contract(ms, u, v);
  const DenseTensor cube = cumulant_contract(ms, v);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double want = 0.0;
      for (std::size_t l = 0; l < 4; ++l) {
        for (std::size_t m = 0; m < 4; ++m) want += ms.m3.at({i, j, l, m}) * u[l] * v[m];
      }
      CHECK(std::fabs(pair(i, j) - want) <= 1e-12);
      for (std::size_t l = 0; l < 4; ++l) {
        double want3 = 0.0;
        for (std::size_t m = 0; m < 4; ++m) want3 += ms.m3.at({i, j, l, m}) * v[m];
        CHECK(std::fabs(cube(i, j, l) - want3) <= 1e-12);
      }
    }
  }

  // Contractions only make sense on fourth-order moment sets.
  const MomentSet topic = topic_population_moments(small_topic_spec());
  CHECK_THROWS_AS((void)cumulant_contract(topic, u, v), validation_error);
  CHECK_THROWS_AS((void)cumulant_contract(topic, v), validation_error);
  CHECK_THROWS_AS((void)cumulant_contract(ms, std::vector<double>{1.0, 0.0}), validation_error);
}

TEST_CASE("ica sampler: three-point sources hit the requested kurtosis") {
  // Kurtosis floor: sources collapse to unit signs.
  IcaSpec rad;
  rad.mixing = Matrix::identity(2);
  rad.kurtoses = {-2.0, -2.0};
  const Matrix signs = sample_ica(rad, 2000, 12);
  double mean = 0.0;
  for (double v : signs.data) {
    CHECK(std::fabs(v) == 1.0);
    mean += v;
  }
  CHECK(std::fabs(mean / static_cast<double>(signs.data.size())) <= 0.05);

  // Zero excess kurtosis needs the three-point family with atom at zero.
  IcaSpec flat;
  flat.mixing = Matrix::identity(1);
  flat.kurtoses = {0.0};
  const Matrix x = sample_ica(flat, 50000, 13);
  const double t = std::sqrt(3.0);
  double zeros = 0.0, second = 0.0, fourth = 0.0;
  for (double v : x.data) {
    CHECK((std::fabs(v) <= 1e-12 || std::fabs(std::fabs(v) - t) <= 1e-12));
    if (std::fabs(v) <= 1e-12) zeros += 1.0;
    second += v * v;
    fourth += v * v * v * v;
  }
  const double n = static_cast<double>(x.rows);
  CHECK(std::fabs(zeros / n - 2.0 / 3.0) <= 0.02);
  CHECK(std::fabs(second / n - 1.0) <= 0.05);
  CHECK(std::fabs(fourth / n - 3.0) <= 0.15);

  // Additive gaussian noise raises the variance by its square.
  IcaSpec noisy = rad;
  noisy.mixing = Matrix::identity(1);
  noisy.kurtoses = {-2.0};
  noisy.noise_sigma = 0.5;
  const Matrix xn = sample_ica(noisy, 50000, 14);
  double var = 0.0;
  for (double v : xn.data) var += v * v;
  CHECK(std::fabs(var / static_cast<double>(xn.rows) - 1.25) <= 0.05);

  IcaSpec bad = rad;
  bad.kurtoses = {-2.0, -2.1};
  CHECK_THROWS_AS((void)sample_ica(bad, 10, 1), validation_error);
  bad = rad;
  bad.noise_sigma = -0.5;
  CHECK_THROWS_AS((void)sample_ica(bad, 10, 1), validation_error);
}

TEST_CASE("lda corrections validated against dirichlet moment identities") {
  const std::vector<double> alpha = {1.0, 2.0, 3.0};
  const Matrix topics = from_columns(6, {{0.4, 0.3, 0.1, 0.1, 0.05, 0.05},
                                         {0.05, 0.1, 0.2, 0.3, 0.25, 0.1},
                                         {0.15, 0.05, 0.3, 0.1, 0.1, 0.3}});
  const RawMoments raw = dirichlet_word_raw(topics, alpha);
  const MomentSet ms = lda_from_raw(raw.mean, raw.second, raw.third, 6.0);
  CHECK(ms.family == ModelFamily::lda);
  CHECK(ms.alpha0 == 6.0);

  std::vector<double> w2(3), w3(3);
  for (std::size_t j = 0; j < 3; ++j) {
    w2[j] = alpha[j] / (7.0 * 6.0);
    w3[j] = 2.0 * alpha[j] / (8.0 * 7.0 * 6.0);
  }
  CHECK(max_abs_diff(ms.m2, outer_sum(topics, w2)) <= 1e-10);
  CHECK(max_diff(ms.m3, cube_sum(topics, w3)) <= 1e-10);

  CHECK_THROWS_AS((void)lda_from_raw(raw.mean, raw.second, raw.third, 0.0), validation_error);
  CHECK_THROWS_AS((void)lda_from_raw(raw.mean, raw.second, raw.third, -1.0), validation_error);
  CHECK_THROWS_AS((void)lda_from_raw({0.5, 0.5}, raw.second, raw.third, 6.0), validation_error);
}

TEST_CASE("lda single topic and small-concentration limits") {
  // One topic: the document distribution is deterministic.
  const std::vector<double> mu = {0.5, 0.3, 0.2};
  const Matrix topics = from_columns(3, {mu});
  RawMoments raw;
  raw.mean = mu;
  raw.second = outer_sum(topics, {1.0});
  raw.third = cube_sum(topics, {1.0});
  const double a0 = 2.5;
  const MomentSet one = lda_from_raw(raw.mean, raw.second, raw.third, a0);
  CHECK(max_abs_diff(one.m2, outer_sum(topics, {1.0 / (a0 + 1.0)})) <= 1e-12);
  CHECK(max_diff(one.m3, cube_sum(topics, {2.0 / ((a0 + 2.0) * (a0 + 1.0))})) <= 1e-12);

  // Small total concentration: the mixed-membership moments approach the
  // single-topic mixture with weights alpha_j / alpha0.
  const std::vector<double> w = {0.2, 0.3, 0.5};
  const Matrix big = from_columns(6, {{0.4, 0.3, 0.1, 0.1, 0.05, 0.05},
                                      {0.05, 0.1, 0.2, 0.3, 0.25, 0.1},
                                      {0.15, 0.05, 0.3, 0.1, 0.1, 0.3}});
  const double tiny = 1e-6;
  std::vector<double> alpha(3);
  for (std::size_t j = 0; j < 3; ++j) alpha[j] = tiny * w[j];
  const RawMoments rawt = dirichlet_word_raw(big, alpha);
  const MomentSet lda = lda_from_raw(rawt.mean, rawt.second, rawt.third, tiny);
  TopicSpec ts;
  ts.weights = w;
  ts.topics = big;
  const MomentSet topic = topic_population_moments(ts);
  CHECK(max_abs_diff(lda.m2, topic.m2) <= 1e-5);
  CHECK(max_diff(lda.m3, topic.m3) <= 1e-5);
}

TEST_CASE("lda empirical moments track the population targets") {
  LdaSpec spec;
  spec.alpha = {0.6, 1.4};
  spec.topics = from_columns(5, {{0.4, 0.3, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.2, 0.3, 0.3}});
  const auto docs = sample_lda(spec, 50000, 3, 61);
  REQUIRE(docs.size() == 50000);
  const MomentSet ms = lda_moments(docs, 5, 2.0);
  std::vector<double> w2(2), w3(2);
  for (std::size_t j = 0; j < 2; ++j) {
    w2[j] = spec.alpha[j] / (3.0 * 2.0);
    w3[j] = 2.0 * spec.alpha[j] / (4.0 * 3.0 * 2.0);
  }
  CHECK(max_abs_diff(ms.m2, outer_sum(spec.topics, w2)) <= 0.02);
  CHECK(frob_diff(ms.m3, cube_sum(spec.topics, w3)) <= 0.03);

  CHECK_THROWS_AS((void)lda_moments(docs, 5, 0.0), validation_error);
  CHECK_THROWS_AS((void)lda_moments({{0, 1}}, 5, 2.0), validation_error);
  CHECK_THROWS_AS((void)lda_moments({}, 5, 2.0), validation_error);
  LdaSpec bad = spec;
  bad.alpha[0] = 0.0;
  CHECK_THROWS_AS((void)sample_lda(bad, 10, 3, 1), validation_error);
}

TEST_CASE("multiview symmetrization: population identities") {
  MultiviewSpec spec;
  spec.weights = {0.1, 0.2, 0.3, 0.4};
  spec.means1 = random_matrix(4, 4, 101);
  spec.means2 = random_matrix(4, 4, 102);
  spec.means3 = random_matrix(4, 4, 103);

  const MomentSet ms = multiview_population_moments(spec);
  CHECK(ms.family == ModelFamily::multiview);
  CHECK(ms.d == 4);
  // Both symmetrized moments land on the third view's mixture moments.
  CHECK(max_abs_diff(ms.m2, outer_sum(spec.means3, spec.weights)) <= 1e-10);
  CHECK(max_diff(ms.m3, cube_sum(spec.means3, spec.weights)) <= 1e-10);

  MultiviewSpec bad = spec;
  bad.weights = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS((void)multiview_population_moments(bad), validation_error);
  bad = spec;
  bad.means2 = random_matrix(4, 3, 9);
  CHECK_THROWS_AS((void)multiview_population_moments(bad), validation_error);

  // Rank-deficient view means leave the cross covariance singular.
  MultiviewSpec flat;
  flat.weights = {0.5, 0.5};
  flat.means1 = from_columns(3, {{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}});
  flat.means2 = random_matrix(3, 2, 8);
  flat.means3 = random_matrix(3, 2, 7);
  CHECK_THROWS_AS((void)multiview_population_moments(flat), numerical_error);
}

TEST_CASE("multiview symmetrization: identity transforms on identical views") {
  MultiviewSpec spec;
  spec.weights = {0.3, 0.3, 0.4};
  const Matrix b = from_columns(3, {{0.8, 0.1, 0.1}, {0.1, 0.7, 0.2}, {0.2, 0.1, 0.7}});
  spec.means1 = b;
  spec.means2 = b;
  spec.means3 = b;
  const TripleSampleBatch batch = sample_multiview(spec, 400, 0.0, 19);

  // Noise-free identical views make the symmetrizing maps the identity, so
  // the output must equal the plain empirical third moment of view 3.
  const std::size_t n = batch.count();
  DenseTensor plain({3, 3, 3});
  Matrix plain2(3, 3);
  for (std::size_t s = 0; s < n; ++s) {
    const std::vector<double> x = get_row(batch.x3, s);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        plain2(i, j) += x[i] * x[j] / static_cast<double>(n);
        for (std::size_t l = 0; l < 3; ++l) {
          plain(i, j, l) += x[i] * x[j] * x[l] / static_cast<double>(n);
        }
      }
    }
  }
  const MomentSet ms = multiview_symmetrized_moments(batch);
  CHECK(max_diff(ms.m3, plain) <= 1e-10);
  CHECK(max_abs_diff(ms.m2, plain2) <= 1e-10);
}

TEST_CASE("multiview recovery of third-view means") {
  MultiviewSpec spec;
  spec.weights = {0.3, 0.3, 0.4};
  spec.means1 = random_matrix(4, 3, 111);
  spec.means2 = random_matrix(4, 3, 112);
  spec.means3 = random_matrix(4, 3, 113);
  const TripleSampleBatch batch = sample_multiview(spec, 200000, 0.3, 23);
  const MomentSet ms = multiview_symmetrized_moments(batch, 3);
  const MixtureEstimate est = learn_mixture(ms, 3);
  const auto pick = match_columns(spec.means3, est.means);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(vec_dist(spec.means3.column(j), est.means.column(pick[j])) <= 0.1);
    CHECK(std::fabs(spec.weights[j] - est.weights[pick[j]]) <= 0.05);
  }
}

TEST_CASE("multiview singular cross covariance is rejected") {
  const Matrix zeros(50, 3);
  const Matrix x2 = random_matrix(50, 3, 41);
  const Matrix x3 = random_matrix(50, 3, 42);
  const TripleSampleBatch batch = make_batch(zeros, x2, x3);
  CHECK_THROWS_AS((void)multiview_symmetrized_moments(batch), numerical_error);
  const TripleSampleBatch ok = make_batch(x2, x2, x3);
  CHECK_THROWS_AS((void)multiview_symmetrized_moments(ok, 10), validation_error);
}

TEST_CASE("hmm reduction: chain statistics as a three-view mixture") {
  HmmSpec spec;
  spec.initial = {1.0, 0.0};
  spec.transition = from_columns(2, {{0.5, 0.5}, {0.2, 0.8}});
  spec.emission = from_columns(3, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}});

  const MultiviewSpec mv = hmm_multiview_spec(spec);
  // Mixing over the second hidden state: w = T pi.
  REQUIRE(mv.weights.size() == 2);
  CHECK(std::fabs(mv.weights[0] - 0.5) <= 1e-12);
  CHECK(std::fabs(mv.weights[1] - 0.5) <= 1e-12);
  CHECK(max_abs_diff(mv.means2, spec.emission) == 0.0);
  // View 3 conditions forward: means are O T columns.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double want = 0.0;
      for (std::size_t h = 0; h < 2; ++h) want += spec.emission(i, h) * spec.transition(h, j);
      CHECK(std::fabs(mv.means3(i, j) - want) <= 1e-12);
      // View 1 conditions backward through Bayes on the second state.
      double back = 0.0;
      for (std::size_t h = 0; h < 2; ++h) {
        back += spec.emission(i, h) * spec.initial[h] * spec.transition(j, h);
      }
      CHECK(std::fabs(mv.means1(i, j) - back / mv.weights[j]) <= 1e-12);
    }
  }

  // Identity transitions freeze the chain: the forward view repeats view 2.
  HmmSpec frozen = spec;
  frozen.initial = {0.3, 0.7};
  frozen.transition = Matrix::identity(2);
  const MultiviewSpec still = hmm_multiview_spec(frozen);
  CHECK(max_abs_diff(still.means3, still.means2) <= 1e-15);

  // A mixing chain yields full-rank views whose population moments follow
  // the generic three-view identities.
  HmmSpec mixing = spec;
  mixing.initial = {0.6, 0.4};
  mixing.transition = from_columns(2, {{0.7, 0.3}, {0.3, 0.7}});
  const MultiviewSpec mvx = hmm_multiview_spec(mixing);
  const MomentSet pop = multiview_population_moments(mvx);
  CHECK(max_diff(pop.m3, cube_sum(mvx.means3, mvx.weights)) <= 1e-10);

  HmmSpec bad = spec;
  bad.transition(0, 0) = 0.6;  // column sum drifts off one
  CHECK_THROWS_AS((void)hmm_multiview_spec(bad), validation_error);
  bad = spec;
  bad.initial = {0.5, 0.2};
  CHECK_THROWS_AS((void)hmm_multiview_spec(bad), validation_error);
  bad = spec;
  bad.emission = from_columns(3, {{0.6, 0.3, 0.1}});
  CHECK_THROWS_AS((void)hmm_multiview_spec(bad), validation_error);
}

TEST_CASE("hmm postprocess inverts the reduction exactly") {
  HmmSpec spec;
  spec.initial = {0.6, 0.4};
  spec.transition = from_columns(2, {{0.7, 0.3}, {0.3, 0.7}});
  spec.emission = from_columns(3, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}});
  const MultiviewSpec mv = hmm_multiview_spec(spec);

  const HmmEstimate est = hmm_postprocess(mv.weights, mv.means2, mv.means3);
  CHECK(max_abs_diff(est.emission, spec.emission) == 0.0);
  CHECK(max_abs_diff(est.transition, spec.transition) <= 1e-10);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::fabs(est.initial[j] - spec.initial[j]) <= 1e-10);
  }

  // Collapsed forward means leave the transition estimate singular.
  const Matrix half = from_columns(2, {{0.5, 0.5}, {0.5, 0.5}});
  const Matrix collapsed = matmul(spec.emission, half);
  CHECK_THROWS_AS((void)hmm_postprocess(mv.weights, mv.means2, collapsed), numerical_error);
  CHECK_THROWS_AS((void)hmm_postprocess({0.5, 0.2, 0.3}, mv.means2, mv.means3), validation_error);
}

TEST_CASE("hmm full pipeline recovers emissions") {
  HmmSpec spec;
  spec.initial = {0.4, 0.6};
  spec.transition = from_columns(2, {{0.7, 0.3}, {0.3, 0.7}});
  spec.emission = from_columns(6, {{0.5, 0.2, 0.1, 0.1, 0.05, 0.05},
                                   {0.05, 0.05, 0.1, 0.15, 0.25, 0.4}});

  const auto seqs = sample_hmm(spec, 100000, 3, 0.2, 8);
  REQUIRE(seqs.size() == 100000);
  REQUIRE(seqs[0].rows == 3);
  REQUIRE(seqs[0].cols == 6);
  const HmmReduction red = hmm_reduce(seqs, 2);
  CHECK(red.moments.d == 6);

  const auto pick = match_columns(spec.emission, red.estimate.emission);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(vec_dist(spec.emission.column(j), red.estimate.emission.column(pick[j])) <= 0.1);
    CHECK(std::fabs(red.estimate.initial[pick[j]] - spec.initial[j]) <= 0.15);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::fabs(red.estimate.transition(pick[i], pick[j]) - spec.transition(i, j)) <= 0.15);
    }
  }

  CHECK_THROWS_AS((void)hmm_reduce({}, 2), validation_error);
  CHECK_THROWS_AS((void)hmm_reduce({Matrix(2, 6)}, 2), validation_error);
}

TEST_CASE("noisy-or pmi: silent generator and exact population structure") {
  NoisyOrSpec spec;
  spec.rho = 0.0;
  spec.weights = from_columns(3, {{0.5, 0.2, 0.8}, {0.1, 0.9, 0.3}});

  // Without activations nothing ever fires and every log is log 1.
  const Matrix silent = sample_noisy_or(spec, 500, 3);
  CHECK(max_abs(silent) == 0.0);
  const MomentSet raw = noisy_or_pmi(silent, 0.0);
  CHECK(max_abs(raw.m2) == 0.0);
  CHECK(frobenius_norm(raw.m3) == 0.0);
  const MomentSet pop0 = noisy_or_population_pmi(spec);
  CHECK(max_abs(pop0.m2) == 0.0);
  CHECK(frobenius_norm(pop0.m3) == 0.0);

  // Wider activation: check the product-form population PMI against a
  // brute-force enumeration over parent configurations.
  spec.rho = 0.08;
  spec.weights = from_columns(3, {{0.10, 0.12, 0.07}, {0.06, 0.08, 0.14}});
  const MomentSet pop = noisy_or_population_pmi(spec);
  std::vector<double> lp1(3);
  for (std::size_t i = 0; i < 3; ++i) {
    lp1[i] = std::log(absent_prob_enum(spec.weights, spec.rho, {i}));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double lp2 = i == j ? lp1[i]
                                : std::log(absent_prob_enum(spec.weights, spec.rho, {i, j}));
      CHECK(std::fabs(pop.m2(i, j) - (lp2 - lp1[i] - lp1[j])) <= 1e-12);
    }
  }
  const double lp123 = std::log(absent_prob_enum(spec.weights, spec.rho, {0, 1, 2}));
  const double lp01 = std::log(absent_prob_enum(spec.weights, spec.rho, {0, 1}));
  const double lp02 = std::log(absent_prob_enum(spec.weights, spec.rho, {0, 2}));
  const double lp12 = std::log(absent_prob_enum(spec.weights, spec.rho, {1, 2}));
  CHECK(std::fabs(pop.m3(0, 1, 2) - (lp01 + lp12 + lp02 - lp123 - lp1[0] - lp1[1] - lp1[2])) <=
        1e-12);

  // Off the diagonal the matrix tracks its low-rank expansion up to third
  // order in the activation probability. Repeated-index entries collapse to
  // -log P terms instead and are excluded on purpose.
  Matrix f(3, 2), g(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      f(i, j) = 1.0 - std::exp(-spec.weights(i, j));
      g(i, j) = 1.0 - std::exp(-2.0 * spec.weights(i, j));
    }
  }
  const double bound = 5.0 * spec.rho * spec.rho * spec.rho;
  double diag_gap = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double lowrank = 0.0;
      for (std::size_t t = 0; t < 2; ++t) {
        lowrank += spec.rho * f(i, t) * f(j, t) +
                   spec.rho * spec.rho * g(i, t) * g(j, t);
      }
      if (i != j) {
        CHECK(std::fabs(pop.m2(i, j) - lowrank) <= bound);
      } else {
        diag_gap = std::max(diag_gap, std::fabs(pop.m2(i, j) - lowrank));
      }
    }
  }
  CHECK(diag_gap > bound);

  // PMI is symmetric by construction, bit for bit.
  CHECK(max_abs_diff(pop.m2, transpose(pop.m2)) == 0.0);
  CHECK(symmetry_defect(pop.m3) == 0.0);

  NoisyOrSpec bad = spec;
  bad.rho = 1.0;
  CHECK_THROWS_AS((void)noisy_or_population_pmi(bad), validation_error);
  bad = spec;
  bad.rho = -0.1;
  CHECK_THROWS_AS((void)sample_noisy_or(bad, 10, 1), validation_error);
  bad = spec;
  bad.weights(0, 0) = -0.5;
  CHECK_THROWS_AS((void)noisy_or_population_pmi(bad), validation_error);
}

TEST_CASE("noisy-or pmi: independent coordinates decorrelate") {
  NoisyOrSpec spec;
  spec.rho = 0.3;
  spec.weights = from_columns(3, {{1.0, 0.0, 0.0}, {0.0, 1.5, 0.0}, {0.0, 0.0, 0.7}});

  // One private parent per coordinate: the population PMI factorizes away.
  const MomentSet pop = noisy_or_population_pmi(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(std::fabs(pop.m2(i, j)) <= 1e-12);
    }
  }

  const Matrix samples = sample_noisy_or(spec, 100000, 21);
  const MomentSet ms = noisy_or_pmi(samples, 0.5);
  CHECK(ms.family == ModelFamily::noisyor);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(std::fabs(ms.m2(i, j)) <= 0.05);
    }
  }
  CHECK(std::fabs(ms.m3(0, 1, 2)) <= 0.05);
  CHECK(max_abs_diff(ms.m2, transpose(ms.m2)) == 0.0);
  CHECK(symmetry_defect(ms.m3) == 0.0);
}

TEST_CASE("noisy-or pmi: smoothing and zero-probability handling") {
  Matrix ones(50, 3);
  for (double& v : ones.data) v = 1.0;
  // Raw frequencies cannot take the log of an impossible absence event.
  CHECK_THROWS_AS((void)noisy_or_pmi(ones, 0.0), numerical_error);
  const MomentSet smoothed = noisy_or_pmi(ones, 0.5);
  for (double v : smoothed.m2.data) CHECK(std::isfinite(v));
  for (double v : smoothed.m3.data) CHECK(std::isfinite(v));

  Matrix bad = ones;
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS((void)noisy_or_pmi(bad, 0.5), validation_error);
  CHECK_THROWS_AS((void)noisy_or_pmi(ones, -0.5), validation_error);
  CHECK_THROWS_AS((void)noisy_or_pmi(Matrix(0, 3), 0.5), validation_error);
}

TEST_CASE("samplers: determinism and degenerate spot checks") {
  // Topic sampler, one topic: word frequencies match the distribution.
  TopicSpec ts;
  ts.weights = {1.0};
  ts.topics = from_columns(6, {{0.3, 0.25, 0.2, 0.1, 0.1, 0.05}});
  const auto docs = sample_topic(ts, 5000, 4, 17);
  std::vector<double> freq(6, 0.0);
  double total = 0.0;
  for (const auto& doc : docs) {
    for (int wd : doc) {
      freq[static_cast<std::size_t>(wd)] += 1.0;
      total += 1.0;
    }
  }
  REQUIRE(total == 20000.0);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::fabs(freq[i] / total - ts.topics(i, 0)) <= 3.0 / std::sqrt(total));
  }
  CHECK(sample_topic(ts, 50, 4, 17) == std::vector<std::vector<int>>(docs.begin(), docs.begin() + 50));
  CHECK(sample_topic(ts, 5000, 4, 18) != docs);

  // Zero-width gaussian mixture: samples sit exactly on the means.
  GmmSpec gs;
  gs.weights = {0.5, 0.5};
  gs.means = from_columns(3, {{1.0, 2.0, 3.0}, {-1.0, 0.0, 1.0}});
  gs.sigmas = {0.0};
  const Matrix pts = sample_gmm(gs, 100, 3);
  bool saw[2] = {false, false};
  for (std::size_t s = 0; s < 100; ++s) {
    const std::vector<double> x = get_row(pts, s);
    bool hit = false;
    for (std::size_t j = 0; j < 2; ++j) {
      if (x == gs.means.column(j)) {
        hit = true;
        saw[j] = true;
      }
    }
    CHECK(hit);
  }
  CHECK(saw[0]);
  CHECK(saw[1]);
  CHECK(max_abs_diff(sample_gmm(gs, 100, 3), pts) == 0.0);
  GmmSpec gbad = gs;
  gbad.sigmas = {-0.1};
  CHECK_THROWS_AS((void)sample_gmm(gbad, 10, 1), validation_error);
  gbad = gs;
  gbad.sigmas = {0.1, 0.1, 0.1};
  CHECK_THROWS_AS((void)sample_gmm(gbad, 10, 1), validation_error);

  // Frozen chain: every observation in a sequence repeats the first.
  HmmSpec hs;
  hs.initial = {0.3, 0.7};
  hs.transition = Matrix::identity(2);
  hs.emission = from_columns(3, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}});
  const auto seqs = sample_hmm(hs, 5, 4, 0.0, 29);
  REQUIRE(seqs.size() == 5);
  for (const Matrix& seq : seqs) {
    REQUIRE(seq.rows == 4);
    const std::vector<double> first = get_row(seq, 0);
    bool is_col = first == hs.emission.column(0) || first == hs.emission.column(1);
    CHECK(is_col);
    for (std::size_t t = 1; t < 4; ++t) CHECK(get_row(seq, t) == first);
  }

  // Multiview sampler: all three views pick the same component.
  MultiviewSpec mvs;
  mvs.weights = {0.4, 0.6};
  mvs.means1 = from_columns(2, {{1.0, 0.0}, {0.0, 1.0}});
  mvs.means2 = from_columns(2, {{2.0, 1.0}, {1.0, 2.0}});
  mvs.means3 = from_columns(3, {{1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}});
  const TripleSampleBatch batch = sample_multiview(mvs, 50, 0.0, 31);
  for (std::size_t s = 0; s < 50; ++s) {
    const std::vector<double> x1 = get_row(batch.x1, s);
    const std::size_t h = x1 == mvs.means1.column(0) ? 0 : 1;
    CHECK(get_row(batch.x1, s) == mvs.means1.column(h));
    CHECK(get_row(batch.x2, s) == mvs.means2.column(h));
    CHECK(get_row(batch.x3, s) == mvs.means3.column(h));
  }

  NoisyOrSpec nos;
  nos.rho = 0.4;
  nos.weights = from_columns(2, {{1.0, 0.5}});
  const Matrix bits = sample_noisy_or(nos, 200, 5);
  for (double v : bits.data) CHECK((v == 0.0 || v == 1.0));
  CHECK(max_abs_diff(sample_noisy_or(nos, 200, 5), bits) == 0.0);
}

TEST_CASE("empirical builders: error halves when n quadruples") {
  const std::array<std::size_t, 3> ns = {10000, 40000, 160000};
  // Six seeds per point: single-seed Frobenius errors are low-dof norms whose
  // means need the extra averaging before a ratio check is meaningful.
  const std::array<std::uint64_t, 6> seeds = {11, 12, 13, 14, 15, 16};

  struct Case {
    std::string name;
    std::size_t scale;  // n multiplier, for estimators with slow transients
    std::function<double(std::size_t, std::uint64_t)> err;
  };
  std::vector<Case> cases;

  const TopicSpec ts = small_topic_spec();
  const MomentSet tpop = topic_population_moments(ts);
  cases.push_back({"topic", 1, [&, tpop](std::size_t n, std::uint64_t seed) {
                     const auto docs = sample_topic(ts, n, 3, seed);
                     return frob_diff(topic_empirical_moments(docs, 5).m3, tpop.m3);
                   }});

  LdaSpec ls;
  ls.alpha = {0.8, 1.2};
  ls.topics = ts.topics;
  DenseTensor ltarget = cube_sum(ls.topics, {2.0 * 0.8 / 24.0, 2.0 * 1.2 / 24.0});
  cases.push_back({"lda", 1, [&, ltarget](std::size_t n, std::uint64_t seed) {
                     const auto docs = sample_lda(ls, n, 3, seed);
                     return frob_diff(lda_moments(docs, 5, 2.0).m3, ltarget);
                   }});

  GmmSpec gc;
  gc.weights = {0.4, 0.6};
  gc.means = from_columns(4, {{1.0, -0.5, 0.3, 0.8}, {-0.7, 0.9, 0.2, -0.4}});
  gc.sigmas = {0.3};
  DenseTensor gtarget = cube_sum(gc.means, gc.weights);
  cases.push_back({"gmm_common", 1, [&, gtarget](std::size_t n, std::uint64_t seed) {
                     return frob_diff(gmm_common_moments(sample_gmm(gc, n, seed)).m3, gtarget);
                   }});

  GmmSpec gd = gc;
  gd.sigmas = {0.2, 0.45};
  cases.push_back({"gmm_differing", 1, [&, gtarget](std::size_t n, std::uint64_t seed) {
                     return frob_diff(gmm_differing_moments(sample_gmm(gd, n, seed)).m3, gtarget);
                   }});

  // Away from the kurtosis floor: at kappa = -2 the sources are deterministic
  // signs and the whole cumulant error collapses to one random scalar, whose
  // norm is far too heavy-tailed for a mean-over-seeds ratio check.
  IcaSpec is;
  is.mixing = from_columns(2, {{1.0, 0.0}, {0.4, 0.9}});
  is.kurtoses = {1.0, -1.2};
  DenseTensor itarget = quad_sum(is.mixing, {1.0, -1.2});
  cases.push_back({"ica", 1, [&, itarget](std::size_t n, std::uint64_t seed) {
                     return frob_diff(ica_cumulant(sample_ica(is, n, seed)).m3, itarget);
                   }});

  // Means are kept diagonally dominant so every cross covariance is well
  // conditioned; the pseudo-inverse step turns sigma_min into a noise
  // amplifier, and a near-singular draw would swamp the 1/sqrt(n) decay.
  // The x4 scale rides out the O(1/n) transient the same inversion causes.
  MultiviewSpec mv;
  mv.weights = {0.25, 0.35, 0.4};
  mv.means1 = from_columns(3, {{1.4, 0.3, -0.2}, {-0.3, 1.2, 0.4}, {0.2, -0.4, 1.3}});
  mv.means2 = from_columns(3, {{1.2, -0.4, 0.3}, {0.5, 1.3, -0.3}, {-0.2, 0.3, 1.1}});
  mv.means3 = from_columns(3, {{1.3, 0.2, -0.4}, {-0.4, 1.2, 0.3}, {0.3, -0.2, 1.4}});
  DenseTensor mtarget = cube_sum(mv.means3, mv.weights);
  cases.push_back({"multiview", 4, [&, mtarget](std::size_t n, std::uint64_t seed) {
                     const TripleSampleBatch b = sample_multiview(mv, n, 0.2, seed);
                     return frob_diff(multiview_symmetrized_moments(b, 3).m3, mtarget);
                   }});

  NoisyOrSpec no;
  no.rho = 0.3;
  no.weights = from_columns(3, {{1.2, 0.4, 0.8}, {0.3, 1.0, 0.8}});
  const MomentSet npop = noisy_or_population_pmi(no);
  cases.push_back({"noisy_or", 1, [&, npop](std::size_t n, std::uint64_t seed) {
                     const MomentSet ms = noisy_or_pmi(sample_noisy_or(no, n, seed), 0.5);
                     return frobenius(sub(ms.m2, npop.m2));
                   }});

  for (const Case& c : cases) {
    std::array<double, 3> err{};
    for (std::size_t i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (std::uint64_t seed : seeds) acc += c.err(ns[i] * c.scale, seed);
      err[i] = acc / static_cast<double>(seeds.size());
    }
    INFO(c.name << ": errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(err[0] / err[1] >= 1.4);
    CHECK(err[0] / err[1] <= 2.6);
    CHECK(err[1] / err[2] >= 1.4);
    CHECK(err[1] / err[2] <= 2.6);
  }
}

TEST_CASE("population moment sets are symmetric") {
  std::vector<MomentSet> sets;
  sets.push_back(topic_population_moments(small_topic_spec()));

  MultiviewSpec mv;
  mv.weights = {0.1, 0.2, 0.3, 0.4};
  mv.means1 = random_matrix(4, 4, 101);
  mv.means2 = random_matrix(4, 4, 102);
  mv.means3 = random_matrix(4, 4, 103);
  sets.push_back(multiview_population_moments(mv));

  HmmSpec hs;
  hs.initial = {0.6, 0.4};
  hs.transition = from_columns(2, {{0.7, 0.3}, {0.3, 0.7}});
  hs.emission = from_columns(3, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}});
  sets.push_back(multiview_population_moments(hmm_multiview_spec(hs)));

  NoisyOrSpec no;
  no.rho = 0.08;
  no.weights = from_columns(3, {{0.10, 0.12, 0.07}, {0.06, 0.08, 0.14}});
  sets.push_back(noisy_or_population_pmi(no));

  IcaSpec is;
  is.mixing = from_columns(3, {{0.9, 0.1, 0.3}, {0.2, 0.8, -0.4}});
  is.kurtoses = {-2.0, 1.0};
  sets.push_back(ica_population_moments(is));

  const Matrix means = from_columns(4, {{1.0, -0.5, 0.3, 0.8}, {-0.7, 0.9, 0.2, -0.4}});
  const RawMoments raw = gaussian_mixture_raw(means, {0.4, 0.6}, {0.3, 0.3});
  sets.push_back(gmm_common_from_raw(raw.mean, raw.second, raw.third));
  sets.push_back(gmm_differing_from_raw(raw.mean, raw.second, raw.third));

  const Matrix topics = from_columns(6, {{0.4, 0.3, 0.1, 0.1, 0.05, 0.05},
                                         {0.05, 0.1, 0.2, 0.3, 0.25, 0.1},
                                         {0.15, 0.05, 0.3, 0.1, 0.1, 0.3}});
  const RawMoments draw = dirichlet_word_raw(topics, {1.0, 2.0, 3.0});
  sets.push_back(lda_from_raw(draw.mean, draw.second, draw.third, 6.0));

  for (const MomentSet& ms : sets) {
    CHECK(max_abs_diff(ms.m2, transpose(ms.m2)) <= 1e-12);
    CHECK(symmetry_defect(ms.m3) <= 1e-10);
  }
}

TEST_CASE("learn_mixture recovers a population mixture and validates input") {
  const TopicSpec ts = small_topic_spec();
  const MomentSet pop = topic_population_moments(ts);
  const MixtureEstimate est = learn_mixture(pop, 2);
  REQUIRE(est.weights.size() == 2);
  CHECK(est.report.scale_invariant_weights.size() == 2);
  const auto pick = match_columns(ts.topics, est.means);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(vec_dist(ts.topics.column(j), est.means.column(pick[j])) <= 1e-6);
    CHECK(std::fabs(ts.weights[j] - est.weights[pick[j]]) <= 1e-6);
  }

  CHECK_THROWS_AS((void)learn_mixture(pop, 0), validation_error);
  CHECK_THROWS_AS((void)learn_mixture(pop, 7), validation_error);

  IcaSpec is;
  is.mixing = from_columns(3, {{0.9, 0.1, 0.3}, {0.2, 0.8, -0.4}});
  is.kurtoses = {-2.0, 1.0};
  const MomentSet quartic = ica_population_moments(is);
  CHECK_THROWS_AS((void)learn_mixture(quartic, 2), validation_error);
}
