// SPDX-License-Identifier: MIT
#include "cpd/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"
#include "cpd/svd.hpp"
#include "cpd/whiten.hpp"

namespace cpd {

namespace {

// Per-sample stream tags, one per family, so no two samplers ever share a
// draw sequence even under the same seed.
constexpr std::uint64_t kTagTopic = 0;
constexpr std::uint64_t kTagGmm = 1;
constexpr std::uint64_t kTagLda = 2;
constexpr std::uint64_t kTagMultiview = 3;
constexpr std::uint64_t kTagHmm = 4;
constexpr std::uint64_t kTagIca = 5;
constexpr std::uint64_t kTagNoisyOr = 6;
constexpr std::uint64_t kTagSplit = 7;

void check_prob_vector(const std::vector<double>& w, const std::string& what) {
  if (w.empty()) throw validation_error(what + ": empty probability vector");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw validation_error(what + ": negative probability");
    s += x;
  }
  if (std::fabs(s - 1.0) > 1e-8) throw validation_error(what + ": probabilities must sum to 1");
}

void check_simplex_columns(const Matrix& m, const std::string& what) {
  if (m.rows == 0 || m.cols == 0) throw validation_error(what + ": empty matrix");
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (!(m(i, j) >= 0.0)) throw validation_error(what + ": negative distribution entry");
      s += m(i, j);
    }
    if (std::fabs(s - 1.0) > 1e-8) throw validation_error(what + ": column must sum to 1");
  }
}

void check_cube(const DenseTensor& t, std::size_t d, const std::string& what) {
  if (t.order() != 3 || t.dims[0] != d || t.dims[1] != d || t.dims[2] != d) {
    throw validation_error(what + ": third moment must be d x d x d");
  }
}

void validate_topic_spec(const TopicSpec& spec, const std::string& what) {
  check_prob_vector(spec.weights, what);
  check_simplex_columns(spec.topics, what);
  if (spec.topics.cols != spec.weights.size()) {
    throw validation_error(what + ": one topic column per mixture weight");
  }
}

void validate_gmm_spec(const GmmSpec& spec, const std::string& what) {
  check_prob_vector(spec.weights, what);
  const std::size_t k = spec.weights.size();
  if (spec.means.cols != k || spec.means.rows == 0) {
    throw validation_error(what + ": one mean column per mixture weight");
  }
  if (spec.sigmas.size() != 1 && spec.sigmas.size() != k) {
    throw validation_error(what + ": sigmas must have length 1 or k");
  }
  for (double s : spec.sigmas) {
    if (!(s >= 0.0)) throw validation_error(what + ": negative noise width");
  }
}

void validate_hmm_spec(const HmmSpec& spec, const std::string& what) {
  check_prob_vector(spec.initial, what);
  const std::size_t k = spec.initial.size();
  if (spec.transition.rows != k || spec.transition.cols != k) {
    throw validation_error(what + ": transition must be k x k");
  }
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(spec.transition(i, j) >= 0.0)) {
        throw validation_error(what + ": negative transition probability");
      }
      s += spec.transition(i, j);
    }
    if (std::fabs(s - 1.0) > 1e-8) {
      throw validation_error(what + ": transition columns must sum to 1");
    }
  }
  if (spec.emission.cols != k || spec.emission.rows == 0) {
    throw validation_error(what + ": one emission column per state");
  }
}

void validate_ica_spec(const IcaSpec& spec, const std::string& what) {
  if (spec.mixing.rows == 0 || spec.mixing.cols == 0) {
    throw validation_error(what + ": empty mixing matrix");
  }
  if (spec.kurtoses.size() != spec.mixing.cols) {
    throw validation_error(what + ": one kurtosis per mixing column");
  }
  for (double kap : spec.kurtoses) {
    if (kap < -2.0) throw validation_error(what + ": kurtosis below the -2 floor");
  }
  if (!(spec.noise_sigma >= 0.0)) throw validation_error(what + ": negative noise width");
}

void validate_noisy_or_spec(const NoisyOrSpec& spec, const std::string& what) {
  if (!(spec.rho >= 0.0 && spec.rho < 1.0)) {
    throw validation_error(what + ": activation probability must lie in [0,1)");
  }
  if (spec.weights.rows == 0 || spec.weights.cols == 0) {
    throw validation_error(what + ": empty weight matrix");
  }
  for (double v : spec.weights.data) {
    if (!(v >= 0.0)) throw validation_error(what + ": negative weight");
  }
}

void validate_multiview_spec(const MultiviewSpec& spec, const std::string& what) {
  check_prob_vector(spec.weights, what);
  const std::size_t k = spec.weights.size();
  for (const Matrix* m : {&spec.means1, &spec.means2, &spec.means3}) {
    if (m->cols != k || m->rows == 0) {
      throw validation_error(what + ": one mean column per mixture weight in every view");
    }
  }
}

// Accumulate w * c (x) c keeping bitwise permutation symmetry.
void add_symmetric_outer(Matrix& m, double w, const std::vector<double>& c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i; j < c.size(); ++j) {
      const double v = w * c[i] * c[j];
      m(i, j) += v;
      if (i != j) m(j, i) += v;
    }
  }
}

// Accumulate w * c^{(x)3}; every distinct permutation slot of a multi-index
// receives the identical product, so the result is exactly symmetric.
void add_symmetric_cube(DenseTensor& t, double w, const std::vector<double>& c) {
  const std::size_t d = c.size();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      for (std::size_t l = j; l < d; ++l) {
        const double v = w * c[i] * c[j] * c[l];
        if (i == j && j == l) {
          t(i, j, l) += v;
        } else if (i == j) {
          t(i, i, l) += v;
          t(i, l, i) += v;
          t(l, i, i) += v;
        } else if (j == l) {
          t(i, j, j) += v;
          t(j, i, j) += v;
          t(j, j, i) += v;
        } else {
          t(i, j, l) += v;
          t(i, l, j) += v;
          t(j, i, l) += v;
          t(j, l, i) += v;
          t(l, i, j) += v;
          t(l, j, i) += v;
        }
      }
    }
  }
}

void assign_all_permutations(DenseTensor& t, std::size_t i, std::size_t j, std::size_t l,
                             double v) {
  t(i, j, l) = v;
  t(i, l, j) = v;
  t(j, i, l) = v;
  t(j, l, i) = v;
  t(l, i, j) = v;
  t(l, j, i) = v;
}

Matrix symmetrized_pair(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = i; j < m.cols; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

DenseTensor symmetrized_cube(const DenseTensor& t) {
  const std::size_t d = t.dims[0];
  DenseTensor out({d, d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      for (std::size_t l = j; l < d; ++l) {
        const double v = (t(i, j, l) + t(i, l, j) + t(j, i, l) + t(j, l, i) + t(l, i, j) +
                          t(l, j, i)) /
                         6.0;
        assign_all_permutations(out, i, j, l, v);
      }
    }
  }
  return out;
}

std::vector<double> row_mean(const Matrix& x) {
  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t s = 0; s < x.rows; ++s) {
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x(s, j);
  }
  for (double& v : mean) v /= static_cast<double>(x.rows);
  return mean;
}

// (1/n) X^T Y; bitwise symmetric whenever X and Y alias the same data.
Matrix cross_moment(const Matrix& x, const Matrix& y) {
  return scale(matmul(transpose(x), y), 1.0 / static_cast<double>(x.rows));
}

// Pseudo-inverse from the leading `rank` singular triplets (all of them when
// rank is 0). Throws when the retained spectrum hits the noise floor: the
// symmetrization transforms divide by these values.
Matrix gated_pinv(const Matrix& m, std::size_t rank, const std::string& what) {
  const SvdResult s = svd(m);
  const std::size_t full = s.singular_values.size();
  const std::size_t r = rank == 0 ? full : rank;
  if (r == 0 || r > full) throw validation_error(what + ": invalid pseudo-inverse rank");
  const double top = s.singular_values[0];
  if (!(top > 0.0) || s.singular_values[r - 1] <= 1e-10 * top) {
    throw numerical_error(what + ": cross covariance is singular at the requested rank");
  }
  Matrix p(m.cols, m.rows);
  for (std::size_t t = 0; t < r; ++t) {
    const double inv = 1.0 / s.singular_values[t];
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double vj = s.v(j, t) * inv;
      for (std::size_t i = 0; i < m.rows; ++i) p(j, i) += vj * s.u(i, t);
    }
  }
  return p;
}

// Sum_j w_j a_j b_j^T from matching columns.
Matrix weighted_cross(const Matrix& a, const Matrix& b, const std::vector<double>& w) {
  Matrix m(a.rows, b.rows);
  for (std::size_t j = 0; j < w.size(); ++j) {
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double ai = w[j] * a(i, j);
      for (std::size_t l = 0; l < b.rows; ++l) m(i, l) += ai * b(l, j);
    }
  }
  return m;
}

// Shared positional counting used by the word-based empirical builders.
MomentSet positional_word_moments(const std::vector<std::vector<int>>& docs, std::size_t d,
                                  const std::array<std::size_t, 3>& positions,
                                  const std::string& what) {
  if (d == 0) throw validation_error(what + ": vocabulary must be nonempty");
  if (docs.empty()) throw validation_error(what + ": empty corpus");
  if (positions[0] == positions[1] || positions[0] == positions[2] ||
      positions[1] == positions[2]) {
    throw validation_error(what + ": word positions must be distinct");
  }
  const std::size_t need = std::max({positions[0], positions[1], positions[2]}) + 1;

  MomentSet ms;
  ms.d = d;
  ms.m1.assign(d, 0.0);
  ms.m2 = Matrix(d, d);
  ms.m3 = DenseTensor({d, d, d});
  for (const std::vector<int>& doc : docs) {
    if (doc.size() < 3 || doc.size() < need) {
      throw validation_error(what + ": document shorter than the requested positions");
    }
    std::size_t w[3];
    for (std::size_t t = 0; t < 3; ++t) {
      const int raw = doc[positions[t]];
      if (raw < 0 || static_cast<std::size_t>(raw) >= d) {
        throw validation_error(what + ": word index out of range");
      }
      w[t] = static_cast<std::size_t>(raw);
    }
    ms.m1[w[0]] += 1.0;
    ms.m2(w[0], w[1]) += 1.0;
    ms.m3(w[0], w[1], w[2]) += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(docs.size());
  for (double& v : ms.m1) v *= inv;
  for (double& v : ms.m2.data) v *= inv;
  for (double& v : ms.m3.data) v *= inv;
  return ms;
}

// Covariance spectrum shared by both gaussian correction paths.
SymEigResult covariance_eig(const std::vector<double>& mean, const Matrix& second) {
  const std::size_t d = mean.size();
  Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = 0.5 * (second(i, j) + second(j, i)) - mean[i] * mean[j];
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return symmetric_eig(cov);
}

void check_gmm_raw(const std::vector<double>& mean, const Matrix& second, const DenseTensor& third,
                   const std::string& what) {
  const std::size_t d = mean.size();
  if (d == 0) throw validation_error(what + ": empty mean");
  if (second.rows != d || second.cols != d) {
    throw validation_error(what + ": second moment must be d x d");
  }
  check_cube(third, d, what);
}

// third - sum_i (v (x) e_i (x) e_i + e_i (x) v (x) e_i + e_i (x) e_i (x) v).
DenseTensor subtract_diagonal_placements(const DenseTensor& third, const std::vector<double>& v) {
  DenseTensor m3 = third;
  const std::size_t d = v.size();
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      m3(a, b, b) -= v[a];
      m3(b, a, b) -= v[a];
      m3(b, b, a) -= v[a];
    }
  }
  return m3;
}

// Gram-Schmidt orthonormalization of gaussian columns; the positive-diagonal
// convention makes the result Haar distributed.
Matrix haar_rotation(std::size_t d, std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
    Rng rng = Rng::stream(seed, attempt, kTagSplit);
    Matrix g(d, d);
    for (double& v : g.data) v = rng.gaussian();
    bool ok = true;
    for (std::size_t j = 0; j < d && ok; ++j) {
      std::vector<double> v = g.column(j);
      for (std::size_t p = 0; p < j; ++p) {
        const std::vector<double> u = g.column(p);
        axpy(-dot(u, v), u, v);
      }
      const double nrm = norm2(v);
      if (nrm <= 1e-12) {
        ok = false;
        break;
      }
      for (double& x : v) x /= nrm;
      g.set_column(j, v);
    }
    if (ok) return transpose(g);  // rows are the orthonormal directions
  }
  throw numerical_error("gmm_multiview_split: degenerate rotation draw");
}

struct PmiTables {
  std::vector<double> lp1;  // log P(single absence)
  Matrix lp2;               // log P(pair absence), diagonal equals lp1
  DenseTensor lp3;          // log P(triple absence), repeats collapsed
};

MomentSet assemble_pmi(const PmiTables& t, std::size_t d) {
  MomentSet ms;
  ms.family = ModelFamily::noisyor;
  ms.d = d;
  ms.m2 = Matrix(d, d);
  ms.m3 = DenseTensor({d, d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = t.lp2(i, j) - t.lp1[i] - t.lp1[j];
      ms.m2(i, j) = v;
      ms.m2(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      for (std::size_t l = j; l < d; ++l) {
        const double v = t.lp2(i, j) + t.lp2(j, l) + t.lp2(i, l) - t.lp3(i, j, l) - t.lp1[i] -
                         t.lp1[j] - t.lp1[l];
        assign_all_permutations(ms.m3, i, j, l, v);
      }
    }
  }
  return ms;
}

std::vector<std::vector<double>> matrix_columns(const Matrix& m) {
  std::vector<std::vector<double>> cols(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) cols[j] = m.column(j);
  return cols;
}

}  // namespace

// --- exchangeable single-topic documents -----------------------------------

MomentSet topic_population_moments(const TopicSpec& spec) {
  validate_topic_spec(spec, "topic_population_moments");
  const std::size_t d = spec.topics.rows;
  MomentSet ms;
  ms.family = ModelFamily::topic;
  ms.d = d;
  ms.k = spec.weights.size();
  ms.m1.assign(d, 0.0);
  ms.m2 = Matrix(d, d);
  ms.m3 = DenseTensor({d, d, d});
  for (std::size_t j = 0; j < ms.k; ++j) {
    const std::vector<double> mu = spec.topics.column(j);
    for (std::size_t i = 0; i < d; ++i) ms.m1[i] += spec.weights[j] * mu[i];
    add_symmetric_outer(ms.m2, spec.weights[j], mu);
    add_symmetric_cube(ms.m3, spec.weights[j], mu);
  }
  return ms;
}

MomentSet topic_empirical_moments(const std::vector<std::vector<int>>& docs, std::size_t d,
                                  const std::array<std::size_t, 3>& positions) {
  MomentSet ms = positional_word_moments(docs, d, positions, "topic_empirical_moments");
  ms.family = ModelFamily::topic;
  return ms;
}

// --- spherical Gaussian mixtures --------------------------------------------

MomentSet gmm_common_from_raw(const std::vector<double>& mean, const Matrix& second,
                              const DenseTensor& third) {
  check_gmm_raw(mean, second, third, "gmm_common_from_raw");
  const std::size_t d = mean.size();
  const SymEigResult eig = covariance_eig(mean, second);
  const double s2 = eig.values.back();

  MomentSet ms;
  ms.family = ModelFamily::gmm;
  ms.d = d;
  ms.sigma_sq = s2;
  ms.m1.resize(d);
  for (std::size_t i = 0; i < d; ++i) ms.m1[i] = s2 * mean[i];
  ms.m2 = second;
  for (std::size_t i = 0; i < d; ++i) ms.m2(i, i) -= s2;
  std::vector<double> scaled(d);
  for (std::size_t i = 0; i < d; ++i) scaled[i] = s2 * mean[i];
  ms.m3 = subtract_diagonal_placements(third, scaled);
  return ms;
}

MomentSet gmm_common_moments(const Matrix& samples) {
  if (samples.rows < 2 || samples.cols == 0) {
    throw validation_error("gmm_common_moments: need at least two samples");
  }
  const std::vector<double> mean = row_mean(samples);
  const Matrix second = cross_moment(samples, samples);
  const DenseTensor third = empirical_tensor(make_batch(samples));
  return gmm_common_from_raw(mean, second, third);
}

MomentSet gmm_differing_from_raw(const std::vector<double>& mean, const Matrix& second,
                                 const DenseTensor& third) {
  check_gmm_raw(mean, second, third, "gmm_differing_from_raw");
  const std::size_t d = mean.size();
  const SymEigResult eig = covariance_eig(mean, second);
  const double s2 = eig.values.back();
  const std::vector<double> v = eig.vectors.column(d - 1);

  // m1 = E[<v, x - mean>^2 x], expanded over the raw moments.
  std::vector<double> m1(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      const double vab = v[a] * v[b];
      for (std::size_t i = 0; i < d; ++i) {
        m1[i] += vab * (third(a, b, i) - mean[a] * second(b, i) - mean[b] * second(a, i) +
                        mean[a] * mean[b] * mean[i]);
      }
    }
  }

  MomentSet ms;
  ms.family = ModelFamily::gmm;
  ms.d = d;
  ms.sigma_sq = s2;
  ms.m1 = m1;
  ms.m2 = second;
  for (std::size_t i = 0; i < d; ++i) ms.m2(i, i) -= s2;
  ms.m3 = subtract_diagonal_placements(third, m1);
  return ms;
}

MomentSet gmm_differing_moments(const Matrix& samples) {
  if (samples.rows < 2 || samples.cols == 0) {
    throw validation_error("gmm_differing_moments: need at least two samples");
  }
  const std::vector<double> mean = row_mean(samples);
  const Matrix second = cross_moment(samples, samples);
  const DenseTensor third = empirical_tensor(make_batch(samples));
  return gmm_differing_from_raw(mean, second, third);
}

SplitBatch gmm_multiview_split(const Matrix& samples, std::uint64_t seed) {
  const std::size_t d = samples.cols;
  if (d < 3) throw validation_error("gmm_multiview_split: need at least three coordinates");
  if (samples.rows == 0) throw validation_error("gmm_multiview_split: empty sample matrix");

  SplitBatch split;
  split.rotation = haar_rotation(d, seed);
  const Matrix rotated = matmul(samples, transpose(split.rotation));

  const std::size_t base = d / 3;
  const std::size_t rem = d % 3;
  const std::size_t d1 = base + (rem > 0 ? 1 : 0);
  const std::size_t d2 = base + (rem > 1 ? 1 : 0);
  const std::size_t d3 = base;
  auto block = [&](std::size_t lo, std::size_t len) {
    Matrix view(rotated.rows, len);
    for (std::size_t s = 0; s < rotated.rows; ++s) {
      for (std::size_t j = 0; j < len; ++j) view(s, j) = rotated(s, lo + j);
    }
    return view;
  };
  split.views = make_batch(block(0, d1), block(d1, d2), block(d1 + d2, d3));
  return split;
}

MixtureEstimate recover_split_means(const SplitBatch& split, std::size_t k,
                                    const PowerConfig& cfg) {
  const std::size_t d1 = split.views.x1.cols;
  const std::size_t d2 = split.views.x2.cols;
  const std::size_t d3 = split.views.x3.cols;
  const std::size_t d = d1 + d2 + d3;
  if (split.rotation.rows != d || split.rotation.cols != d) {
    throw validation_error("recover_split_means: rotation does not match the view split");
  }

  const MomentSet ms = multiview_symmetrized_moments(split.views, k);
  const MixtureEstimate mix = learn_mixture(ms, k, cfg);

  // Views 1 and 2 by cross-moment regression against the recovered third
  // view; diag(w) B3^T carries the component correspondence through.
  Matrix dw_b3t(k, d3);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < d3; ++i) dw_b3t(j, i) = mix.weights[j] * mix.means(i, j);
  }
  const Matrix reg = gated_pinv(dw_b3t, k, "recover_split_means");
  const Matrix b1 = matmul(cross_moment(split.views.x1, split.views.x3), reg);
  const Matrix b2 = matmul(cross_moment(split.views.x2, split.views.x3), reg);

  Matrix stacked(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < d1; ++i) stacked(i, j) = b1(i, j);
    for (std::size_t i = 0; i < d2; ++i) stacked(d1 + i, j) = b2(i, j);
    for (std::size_t i = 0; i < d3; ++i) stacked(d1 + d2 + i, j) = mix.means(i, j);
  }

  MixtureEstimate est;
  est.weights = mix.weights;
  est.means = matmul(transpose(split.rotation), stacked);
  est.report = mix.report;
  return est;
}

// --- independent component analysis ------------------------------------------

MomentSet ica_cumulant(const Matrix& samples) {
  if (samples.rows < 2 || samples.cols == 0) {
    throw validation_error("ica_cumulant: need at least two samples");
  }
  const std::size_t n = samples.rows;
  const std::size_t d = samples.cols;
  const Matrix sec = cross_moment(samples, samples);

  MomentSet ms;
  ms.family = ModelFamily::ica;
  ms.d = d;
  ms.m2 = sec;
  ms.m3 = DenseTensor({d, d, d, d});
  const double inv = 1.0 / static_cast<double>(n);
  std::size_t out = 0;
  for (std::size_t i1 = 0; i1 < d; ++i1) {
    for (std::size_t i2 = 0; i2 < d; ++i2) {
      for (std::size_t i3 = 0; i3 < d; ++i3) {
        for (std::size_t i4 = 0; i4 < d; ++i4, ++out) {
          const double e4 = detail::pairwise_sum(
              [&](std::size_t s) {
                return samples(s, i1) * samples(s, i2) * samples(s, i3) * samples(s, i4);
              },
              0, n);
          ms.m3.data[out] = e4 * inv - sec(i1, i2) * sec(i3, i4) - sec(i1, i3) * sec(i2, i4) -
                            sec(i1, i4) * sec(i2, i3);
        }
      }
    }
  }
  return ms;
}

MomentSet ica_population_moments(const IcaSpec& spec) {
  validate_ica_spec(spec, "ica_population_moments");
  const std::size_t d = spec.mixing.rows;
  const std::size_t k = spec.mixing.cols;

  MomentSet ms;
  ms.family = ModelFamily::ica;
  ms.d = d;
  ms.k = k;
  ms.m2 = matmul(spec.mixing, transpose(spec.mixing));
  const double noise_var = spec.noise_sigma * spec.noise_sigma;
  for (std::size_t i = 0; i < d; ++i) ms.m2(i, i) += noise_var;

  ms.m3 = DenseTensor({d, d, d, d});
  for (std::size_t j = 0; j < k; ++j) {
    const std::vector<double> a = spec.mixing.column(j);
    const double kap = spec.kurtoses[j];
    std::size_t out = 0;
    for (std::size_t i1 = 0; i1 < d; ++i1) {
      for (std::size_t i2 = 0; i2 < d; ++i2) {
        for (std::size_t i3 = 0; i3 < d; ++i3) {
          for (std::size_t i4 = 0; i4 < d; ++i4, ++out) {
            // Product over sorted indices: every permutation slot gets the
            // bitwise identical value.
            std::size_t s[4] = {i1, i2, i3, i4};
            std::sort(s, s + 4);
            ms.m3.data[out] += kap * a[s[0]] * a[s[1]] * a[s[2]] * a[s[3]];
          }
        }
      }
    }
  }
  return ms;
}

Matrix cumulant_contract(const MomentSet& ms, const std::vector<double>& u,
                         const std::vector<double>& v) {
  if (ms.m3.order() != 4) {
    throw validation_error("cumulant_contract: needs a fourth-order moment set");
  }
  const std::size_t d = ms.m3.dims[0];
  if (u.size() != d || v.size() != d) {
    throw validation_error("cumulant_contract: probe length must match the tensor");
  }
  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < d; ++l) {
        for (std::size_t m = 0; m < d; ++m) acc += ms.m3.at({i, j, l, m}) * u[l] * v[m];
      }
      out(i, j) = acc;
    }
  }
  return out;
}

DenseTensor cumulant_contract(const MomentSet& ms, const std::vector<double>& v) {
  if (ms.m3.order() != 4) {
    throw validation_error("cumulant_contract: needs a fourth-order moment set");
  }
  const std::size_t d = ms.m3.dims[0];
  if (v.size() != d) {
    throw validation_error("cumulant_contract: probe length must match the tensor");
  }
  DenseTensor out({d, d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t l = 0; l < d; ++l) {
        double acc = 0.0;
        for (std::size_t m = 0; m < d; ++m) acc += ms.m3.at({i, j, l, m}) * v[m];
        out(i, j, l) = acc;
      }
    }
  }
  return out;
}

// --- latent Dirichlet allocation ----------------------------------------------

MomentSet lda_from_raw(const std::vector<double>& m1, const Matrix& pair_raw,
                       const DenseTensor& triple_raw, double alpha0) {
  if (!(alpha0 > 0.0)) throw validation_error("lda_from_raw: alpha0 must be positive");
  const std::size_t d = m1.size();
  if (d == 0) throw validation_error("lda_from_raw: empty first moment");
  if (pair_raw.rows != d || pair_raw.cols != d) {
    throw validation_error("lda_from_raw: pair moment must be d x d");
  }
  check_cube(triple_raw, d, "lda_from_raw");

  const double c2 = alpha0 / (alpha0 + 1.0);
  const double c3 = alpha0 / (alpha0 + 2.0);
  const double c33 = 2.0 * alpha0 * alpha0 / ((alpha0 + 2.0) * (alpha0 + 1.0));

  MomentSet ms;
  ms.family = ModelFamily::lda;
  ms.d = d;
  ms.alpha0 = alpha0;
  ms.m1 = m1;
  ms.m2 = pair_raw;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) ms.m2(i, j) -= c2 * m1[i] * m1[j];
  }
  ms.m3 = triple_raw;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t l = 0; l < d; ++l) {
        ms.m3(i, j, l) -= c3 * (pair_raw(i, j) * m1[l] + pair_raw(i, l) * m1[j] +
                                pair_raw(j, l) * m1[i]);
        ms.m3(i, j, l) += c33 * m1[i] * m1[j] * m1[l];
      }
    }
  }
  return ms;
}

MomentSet lda_moments(const std::vector<std::vector<int>>& docs, std::size_t d, double alpha0) {
  if (!(alpha0 > 0.0)) throw validation_error("lda_moments: alpha0 must be positive");
  const MomentSet raw = positional_word_moments(docs, d, {0, 1, 2}, "lda_moments");
  return lda_from_raw(raw.m1, raw.m2, raw.m3, alpha0);
}

// --- three-view mixtures --------------------------------------------------------

MomentSet multiview_symmetrized_moments(const TripleSampleBatch& batch, std::size_t k) {
  const std::size_t n = batch.count();
  const std::size_t d1 = batch.x1.cols;
  const std::size_t d2 = batch.x2.cols;
  const std::size_t d3 = batch.x3.cols;
  if (n == 0 || d1 == 0 || d2 == 0 || d3 == 0) {
    throw validation_error("multiview_symmetrized_moments: empty view");
  }
  if (k > std::min({d1, d2, d3})) {
    throw validation_error("multiview_symmetrized_moments: rank exceeds a view dimension");
  }

  const Matrix p12 = cross_moment(batch.x1, batch.x2);
  const Matrix a = matmul(cross_moment(batch.x3, batch.x2),
                          gated_pinv(p12, k, "multiview_symmetrized_moments"));
  const Matrix b = matmul(cross_moment(batch.x3, batch.x1),
                          gated_pinv(transpose(p12), k, "multiview_symmetrized_moments"));

  const Matrix xt1 = matmul(batch.x1, transpose(a));
  const Matrix xt2 = matmul(batch.x2, transpose(b));

  MomentSet ms;
  ms.family = ModelFamily::multiview;
  ms.d = d3;
  ms.k = k;
  ms.m2 = cross_moment(xt1, xt2);
  ms.m3 = empirical_tensor(make_batch(xt1, xt2, batch.x3));
  return ms;
}

MomentSet multiview_population_moments(const MultiviewSpec& spec) {
  validate_multiview_spec(spec, "multiview_population_moments");
  const std::size_t k = spec.weights.size();
  const std::size_t d3 = spec.means3.rows;

  const Matrix p12 = weighted_cross(spec.means1, spec.means2, spec.weights);
  const Matrix p32 = weighted_cross(spec.means3, spec.means2, spec.weights);
  const Matrix p31 = weighted_cross(spec.means3, spec.means1, spec.weights);
  const Matrix a = matmul(p32, gated_pinv(p12, k, "multiview_population_moments"));
  const Matrix b = matmul(p31, gated_pinv(transpose(p12), k, "multiview_population_moments"));

  const Matrix t1 = matmul(a, spec.means1);
  const Matrix t2 = matmul(b, spec.means2);

  Matrix m2(d3, d3);
  DenseTensor m3({d3, d3, d3});
  for (std::size_t j = 0; j < k; ++j) {
    const std::vector<double> u = t1.column(j);
    const std::vector<double> v = t2.column(j);
    const std::vector<double> w = spec.means3.column(j);
    for (std::size_t i = 0; i < d3; ++i) {
      const double wi = spec.weights[j] * u[i];
      for (std::size_t p = 0; p < d3; ++p) {
        m2(i, p) += wi * v[p];
        for (std::size_t l = 0; l < d3; ++l) m3(i, p, l) += wi * v[p] * w[l];
      }
    }
  }

  MomentSet ms;
  ms.family = ModelFamily::multiview;
  ms.d = d3;
  ms.k = k;
  // The transformed views agree only up to roundoff; symmetrizing keeps the
  // population invariant exact.
  ms.m2 = symmetrized_pair(m2);
  ms.m3 = symmetrized_cube(m3);
  return ms;
}

MixtureEstimate learn_mixture(const MomentSet& ms, std::size_t k, const PowerConfig& cfg) {
  if (k == 0) throw validation_error("learn_mixture: rank must be positive");
  if (ms.m3.order() != 3) {
    throw validation_error("learn_mixture: needs a third-order moment tensor");
  }
  const std::size_t d = ms.d != 0 ? ms.d : ms.m3.dims[0];
  check_cube(ms.m3, d, "learn_mixture");
  if (ms.m2.rows != d || ms.m2.cols != d) {
    throw validation_error("learn_mixture: second moment must be d x d");
  }
  if (k > d) throw validation_error("learn_mixture: rank exceeds the dimension");

  // Raw empirical inputs carry estimator noise that breaks symmetry; the
  // whitened decomposition assumes it, so average the permutations first.
  const Matrix m2 = symmetrized_pair(ms.m2);
  const DenseTensor m3 = symmetrized_cube(ms.m3);
  auto [kf, report] = decompose_nonorthogonal(m3, m2, k, cfg);

  MixtureEstimate est;
  est.weights.resize(k);
  est.means = Matrix(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double lt = report.scale_invariant_weights[j];
    const double s = report.component_scales[j];
    if (!(lt > 0.0)) {
      throw numerical_error("learn_mixture: nonpositive whitened eigenvalue");
    }
    // Whitened eigenvalue 1/sqrt(w_j) and component scale s_j = sqrt(w_j)
    // ||mu_j|| factor apart into the mixing weight and the mean.
    est.weights[j] = 1.0 / (lt * lt);
    std::vector<double> col = kf.factors[0].column(j);
    for (double& x : col) x *= lt * s;
    est.means.set_column(j, col);
  }
  est.report = std::move(report);
  return est;
}

// --- hidden Markov chains --------------------------------------------------------

MultiviewSpec hmm_multiview_spec(const HmmSpec& spec) {
  validate_hmm_spec(spec, "hmm_multiview_spec");
  const std::size_t k = spec.initial.size();

  MultiviewSpec mv;
  mv.weights = matvec(spec.transition, spec.initial);
  for (double w : mv.weights) {
    if (!(w > 0.0)) {
      throw numerical_error("hmm_multiview_spec: a second-state weight vanishes");
    }
  }
  mv.means2 = spec.emission;
  mv.means3 = matmul(spec.emission, spec.transition);
  // Backward view: P(first state | second state) through Bayes' rule.
  Matrix back(k, k);
  for (std::size_t h = 0; h < k; ++h) {
    for (std::size_t j = 0; j < k; ++j) {
      back(h, j) = spec.initial[h] * spec.transition(j, h) / mv.weights[j];
    }
  }
  mv.means1 = matmul(spec.emission, back);
  return mv;
}

HmmEstimate hmm_postprocess(const std::vector<double>& mix_weights, const Matrix& view2_means,
                            const Matrix& view3_means) {
  const std::size_t k = mix_weights.size();
  if (k == 0) throw validation_error("hmm_postprocess: empty weight vector");
  if (view2_means.cols != k || view3_means.cols != k ||
      view2_means.rows != view3_means.rows || view2_means.rows == 0) {
    throw validation_error("hmm_postprocess: view means must share shape d x k");
  }

  HmmEstimate est;
  est.emission = view2_means;
  est.transition = matmul(gated_pinv(view2_means, k, "hmm_postprocess"), view3_means);
  const Matrix tinv = gated_pinv(est.transition, k, "hmm_postprocess");
  est.initial = matvec(tinv, mix_weights);
  return est;
}

HmmReduction hmm_reduce(const std::vector<Matrix>& sequences, std::size_t k,
                        const PowerConfig& cfg) {
  if (sequences.empty()) throw validation_error("hmm_reduce: empty sequence set");
  const std::size_t d = sequences.front().cols;
  if (d == 0) throw validation_error("hmm_reduce: empty observations");
  const std::size_t n = sequences.size();
  Matrix x1(n, d), x2(n, d), x3(n, d);
  for (std::size_t s = 0; s < n; ++s) {
    const Matrix& seq = sequences[s];
    if (seq.rows < 3 || seq.cols != d) {
      throw validation_error("hmm_reduce: every sequence needs three observations of width d");
    }
    for (std::size_t j = 0; j < d; ++j) {
      x1(s, j) = seq(0, j);
      x2(s, j) = seq(1, j);
      x3(s, j) = seq(2, j);
    }
  }

  HmmReduction red;
  red.moments = multiview_symmetrized_moments(make_batch(x1, x2, x3), k);
  const MixtureEstimate mix = learn_mixture(red.moments, k, cfg);

  // View-2 means by cross-moment regression against the recovered view-3
  // means, preserving the component order of the decomposition.
  Matrix dw_b3t(k, d);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < d; ++i) dw_b3t(j, i) = mix.weights[j] * mix.means(i, j);
  }
  const Matrix b2 = matmul(cross_moment(x2, x3), gated_pinv(dw_b3t, k, "hmm_reduce"));

  red.estimate = hmm_postprocess(mix.weights, b2, mix.means);
  return red;
}

// --- noisy-or networks -------------------------------------------------------------

MomentSet noisy_or_pmi(const Matrix& samples, double smoothing) {
  if (samples.rows == 0 || samples.cols == 0) {
    throw validation_error("noisy_or_pmi: empty sample matrix");
  }
  if (!(smoothing >= 0.0)) throw validation_error("noisy_or_pmi: negative smoothing");
  for (double v : samples.data) {
    if (v != 0.0 && v != 1.0) throw validation_error("noisy_or_pmi: samples must be binary");
  }
  const std::size_t n = samples.rows;
  const std::size_t d = samples.cols;

  std::vector<double> c1(d, 0.0);
  Matrix c2(d, d);
  DenseTensor c3({d, d, d});
  std::vector<std::size_t> absent;
  absent.reserve(d);
  for (std::size_t s = 0; s < n; ++s) {
    absent.clear();
    for (std::size_t i = 0; i < d; ++i) {
      if (samples(s, i) == 0.0) absent.push_back(i);
    }
    for (std::size_t ai = 0; ai < absent.size(); ++ai) {
      const std::size_t i = absent[ai];
      c1[i] += 1.0;
      for (std::size_t aj = ai; aj < absent.size(); ++aj) {
        const std::size_t j = absent[aj];
        c2(i, j) += 1.0;
        for (std::size_t al = aj; al < absent.size(); ++al) c3(i, j, absent[al]) += 1.0;
      }
    }
  }

  const double denom = static_cast<double>(n) + 2.0 * smoothing;
  auto log_prob = [&](double count, const char* what) {
    const double p = (count + smoothing) / denom;
    if (!(p > 0.0)) {
      throw numerical_error(std::string("noisy_or_pmi: zero-probability ") + what +
                            " event; increase smoothing");
    }
    return std::log(p);
  };

  PmiTables t;
  t.lp1.resize(d);
  t.lp2 = Matrix(d, d);
  t.lp3 = DenseTensor({d, d, d});
  for (std::size_t i = 0; i < d; ++i) t.lp1[i] = log_prob(c1[i], "single");
  for (std::size_t i = 0; i < d; ++i) {
    t.lp2(i, i) = t.lp1[i];
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = log_prob(c2(i, j), "pair");
      t.lp2(i, j) = v;
      t.lp2(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      for (std::size_t l = j; l < d; ++l) {
        double v;
        if (i == j && j == l) {
          v = t.lp1[i];
        } else if (i == j) {
          v = t.lp2(i, l);
        } else if (j == l) {
          v = t.lp2(i, j);
        } else {
          v = log_prob(c3(i, j, l), "triple");
        }
        assign_all_permutations(t.lp3, i, j, l, v);
      }
    }
  }
  return assemble_pmi(t, d);
}

MomentSet noisy_or_population_pmi(const NoisyOrSpec& spec) {
  validate_noisy_or_spec(spec, "noisy_or_population_pmi");
  const std::size_t d = spec.weights.rows;
  const std::size_t k = spec.weights.cols;

  // P(all of S absent) factorizes over parents; S must be deduplicated
  // because absence events are idempotent.
  auto log_absent = [&](std::vector<std::size_t> s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    double lp = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double load = 0.0;
      for (std::size_t i : s) load += spec.weights(i, j);
      lp += std::log(1.0 - spec.rho + spec.rho * std::exp(-load));
    }
    return lp;
  };

  PmiTables t;
  t.lp1.resize(d);
  t.lp2 = Matrix(d, d);
  t.lp3 = DenseTensor({d, d, d});
  for (std::size_t i = 0; i < d; ++i) t.lp1[i] = log_absent({i});
  for (std::size_t i = 0; i < d; ++i) {
    t.lp2(i, i) = t.lp1[i];
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = log_absent({i, j});
      t.lp2(i, j) = v;
      t.lp2(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      for (std::size_t l = j; l < d; ++l) {
        double v;
        if (i == j && j == l) {
          v = t.lp1[i];
        } else if (i == j) {
          v = t.lp2(i, l);
        } else if (j == l) {
          v = t.lp2(i, j);
        } else {
          v = log_absent({i, j, l});
        }
        assign_all_permutations(t.lp3, i, j, l, v);
      }
    }
  }
  MomentSet ms = assemble_pmi(t, d);
  ms.k = k;
  return ms;
}

// --- samplers -----------------------------------------------------------------------

std::vector<std::vector<int>> sample_topic(const TopicSpec& spec, std::size_t docs,
                                           std::size_t words, std::uint64_t seed) {
  validate_topic_spec(spec, "sample_topic");
  if (docs == 0 || words == 0) {
    throw validation_error("sample_topic: need at least one document and one word");
  }
  const auto cols = matrix_columns(spec.topics);
  std::vector<std::vector<int>> out(docs);
  for (std::size_t s = 0; s < docs; ++s) {
    Rng rng = Rng::stream(seed, s, kTagTopic);
    const std::size_t h = rng.categorical(spec.weights);
    out[s].resize(words);
    for (std::size_t w = 0; w < words; ++w) {
      out[s][w] = static_cast<int>(rng.categorical(cols[h]));
    }
  }
  return out;
}

Matrix sample_gmm(const GmmSpec& spec, std::size_t n, std::uint64_t seed) {
  validate_gmm_spec(spec, "sample_gmm");
  if (n == 0) throw validation_error("sample_gmm: need at least one sample");
  const std::size_t d = spec.means.rows;
  Matrix out(n, d);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = Rng::stream(seed, s, kTagGmm);
    const std::size_t h = rng.categorical(spec.weights);
    const double sig = spec.sigmas.size() == 1 ? spec.sigmas[0] : spec.sigmas[h];
    for (std::size_t i = 0; i < d; ++i) out(s, i) = spec.means(i, h) + sig * rng.gaussian();
  }
  return out;
}

std::vector<std::vector<int>> sample_lda(const LdaSpec& spec, std::size_t docs, std::size_t words,
                                         std::uint64_t seed) {
  for (double a : spec.alpha) {
    if (!(a > 0.0)) throw validation_error("sample_lda: concentrations must be positive");
  }
  if (spec.alpha.empty()) throw validation_error("sample_lda: empty concentration vector");
  check_simplex_columns(spec.topics, "sample_lda");
  if (spec.topics.cols != spec.alpha.size()) {
    throw validation_error("sample_lda: one topic column per concentration");
  }
  if (docs == 0 || words == 0) {
    throw validation_error("sample_lda: need at least one document and one word");
  }
  const auto cols = matrix_columns(spec.topics);
  std::vector<std::vector<int>> out(docs);
  for (std::size_t s = 0; s < docs; ++s) {
    Rng rng = Rng::stream(seed, s, kTagLda);
    const std::vector<double> h = rng.dirichlet(spec.alpha);
    out[s].resize(words);
    for (std::size_t w = 0; w < words; ++w) {
      const std::size_t topic = rng.categorical(h);
      out[s][w] = static_cast<int>(rng.categorical(cols[topic]));
    }
  }
  return out;
}

TripleSampleBatch sample_multiview(const MultiviewSpec& spec, std::size_t n, double noise_sigma,
                                   std::uint64_t seed) {
  validate_multiview_spec(spec, "sample_multiview");
  if (n == 0) throw validation_error("sample_multiview: need at least one sample");
  if (!(noise_sigma >= 0.0)) throw validation_error("sample_multiview: negative noise width");
  Matrix x1(n, spec.means1.rows), x2(n, spec.means2.rows), x3(n, spec.means3.rows);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = Rng::stream(seed, s, kTagMultiview);
    const std::size_t h = rng.categorical(spec.weights);
    auto fill = [&](Matrix& x, const Matrix& means) {
      for (std::size_t i = 0; i < means.rows; ++i) {
        x(s, i) = means(i, h) + noise_sigma * rng.gaussian();
      }
    };
    fill(x1, spec.means1);
    fill(x2, spec.means2);
    fill(x3, spec.means3);
  }
  return make_batch(std::move(x1), std::move(x2), std::move(x3));
}

std::vector<Matrix> sample_hmm(const HmmSpec& spec, std::size_t sequences, std::size_t length,
                               double noise_sigma, std::uint64_t seed) {
  validate_hmm_spec(spec, "sample_hmm");
  if (sequences == 0 || length == 0) {
    throw validation_error("sample_hmm: need at least one sequence and one step");
  }
  if (!(noise_sigma >= 0.0)) throw validation_error("sample_hmm: negative noise width");
  const std::size_t d = spec.emission.rows;
  const auto tcols = matrix_columns(spec.transition);
  std::vector<Matrix> out(sequences);
  for (std::size_t s = 0; s < sequences; ++s) {
    Rng rng = Rng::stream(seed, s, kTagHmm);
    Matrix seq(length, d);
    std::size_t y = rng.categorical(spec.initial);
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t i = 0; i < d; ++i) {
        seq(t, i) = spec.emission(i, y) + noise_sigma * rng.gaussian();
      }
      if (t + 1 < length) y = rng.categorical(tcols[y]);
    }
    out[s] = std::move(seq);
  }
  return out;
}

Matrix sample_ica(const IcaSpec& spec, std::size_t n, std::uint64_t seed) {
  validate_ica_spec(spec, "sample_ica");
  if (n == 0) throw validation_error("sample_ica: need at least one sample");
  const std::size_t d = spec.mixing.rows;
  const std::size_t k = spec.mixing.cols;

  // Symmetric three-point source {-t, 0, t}: mass p at the spikes gives unit
  // variance at t = 1/sqrt(p) and fourth moment 1/p, so p = 1/(kurtosis + 3)
  // realizes every admissible kurtosis; the floor lands on unit signs.
  std::vector<double> p(k), spike(k);
  for (std::size_t j = 0; j < k; ++j) {
    p[j] = 1.0 / (spec.kurtoses[j] + 3.0);
    spike[j] = 1.0 / std::sqrt(p[j]);
  }

  Matrix out(n, d);
  std::vector<double> h(k);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = Rng::stream(seed, s, kTagIca);
    for (std::size_t j = 0; j < k; ++j) {
      const double u = rng.uniform01();
      h[j] = u < 0.5 * p[j] ? -spike[j] : (u < p[j] ? spike[j] : 0.0);
    }
    for (std::size_t i = 0; i < d; ++i) {
      double x = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (h[j] != 0.0) x += spec.mixing(i, j) * h[j];
      }
      out(s, i) = x;
    }
    if (spec.noise_sigma > 0.0) {
      for (std::size_t i = 0; i < d; ++i) out(s, i) += spec.noise_sigma * rng.gaussian();
    }
  }
  return out;
}

Matrix sample_noisy_or(const NoisyOrSpec& spec, std::size_t n, std::uint64_t seed) {
  validate_noisy_or_spec(spec, "sample_noisy_or");
  if (n == 0) throw validation_error("sample_noisy_or: need at least one sample");
  const std::size_t d = spec.weights.rows;
  const std::size_t k = spec.weights.cols;
  Matrix out(n, d);
  std::vector<bool> h(k);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = Rng::stream(seed, s, kTagNoisyOr);
    for (std::size_t j = 0; j < k; ++j) h[j] = rng.uniform01() < spec.rho;
    for (std::size_t i = 0; i < d; ++i) {
      double load = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (h[j]) load += spec.weights(i, j);
      }
      // Fires with probability 1 - exp(-load); load 0 never fires.
      out(s, i) = rng.uniform01() < 1.0 - std::exp(-load) ? 1.0 : 0.0;
    }
  }
  return out;
}

// --- corpus text format ----------------------------------------------------------------

std::vector<std::vector<int>> parse_corpus(std::istream& in) {
  std::vector<std::vector<int>> docs;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream tokens(line);
    std::string tok;
    std::vector<int> doc;
    while (tokens >> tok) {
      for (char c : tok) {
        if (c < '0' || c > '9') {
          throw validation_error("parse_corpus: malformed token '" + tok + "'");
        }
      }
      try {
        const unsigned long v = std::stoul(tok);
        if (v > static_cast<unsigned long>(std::numeric_limits<int>::max())) {
          throw std::out_of_range(tok);
        }
        doc.push_back(static_cast<int>(v));
      } catch (const std::out_of_range&) {
        throw validation_error("parse_corpus: word index out of range '" + tok + "'");
      }
    }
    if (!doc.empty()) docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(std::ostream& out, const std::vector<std::vector<int>>& docs) {
  for (const std::vector<int>& doc : docs) {
    for (std::size_t j = 0; j < doc.size(); ++j) {
      if (j != 0) out << ' ';
      out << doc[j];
    }
    out << '\n';
  }
}

}  // namespace cpd
