// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cpd/matrix.hpp"
#include "cpd/power.hpp"
#include "cpd/report.hpp"
#include "cpd/stream.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

enum class ModelFamily { topic, gmm, lda, multiview, hmm, ica, noisyor };

/// Moment statistics of one latent variable model, shaped for the
/// decomposition pipelines. m3 holds the third-order tensor for every family
/// except ica, where it is the fourth-order cumulant. Population builders
/// emit exactly symmetric m2/m3; empirical builders keep their raw estimator
/// form, whose symmetry holds in expectation but not at finite n.
struct MomentSet {
  ModelFamily family = ModelFamily::topic;
  std::size_t d = 0;
  std::size_t k = 0;       // component count when known, 0 otherwise
  std::vector<double> m1;  // first-order term; empty for families without one
  Matrix m2;
  DenseTensor m3;
  double alpha0 = 0.0;    // mixed-membership concentration, 0 elsewhere
  double sigma_sq = 0.0;  // recovered noise variance, 0 elsewhere
};

/// Mixing weights on the simplex; topics are columns of `topics`, each a
/// distribution over the d words.
struct TopicSpec {
  std::vector<double> weights;  // length k
  Matrix topics;                // d x k
};

/// Spherical Gaussian mixture. sigmas has length 1 (shared covariance) or k
/// (per component). sigma = 0 is accepted and degenerates to point masses.
struct GmmSpec {
  std::vector<double> weights;
  Matrix means;  // d x k
  std::vector<double> sigmas;
};

struct LdaSpec {
  std::vector<double> alpha;  // length k, strictly positive
  Matrix topics;              // d x k, columns on the simplex
};

/// Conditional means per view; the views share the mixing weights. The
/// sampler adds Gaussian noise of a per-call width around the means.
struct MultiviewSpec {
  std::vector<double> weights;
  Matrix means1, means2, means3;  // d_t x k
};

struct HmmSpec {
  std::vector<double> initial;  // length k
  Matrix transition;            // k x k, column-stochastic
  Matrix emission;              // d x k, conditional observation means
};

/// x = A h + noise_sigma z with independent zero-mean unit-variance sources.
/// kurtoses[j] = E[h_j^4] - 3 and must be >= -2 (the attainable floor, hit
/// exactly by Rademacher signs). The sampler draws each source from the
/// symmetric three-point family {-t, 0, t}, which realizes any admissible
/// kurtosis.
struct IcaSpec {
  Matrix mixing;                 // d x k
  std::vector<double> kurtoses;  // length k
  double noise_sigma = 0.0;
};

struct NoisyOrSpec {
  double rho = 0.0;  // activation probability, in [0,1); 0 is the silent generator
  Matrix weights;    // d x k, nonnegative
};

struct MixtureEstimate {
  std::vector<double> weights;
  Matrix means;  // d x k, one column per recovered component
  DecompositionReport report;
};

struct HmmEstimate {
  std::vector<double> initial;
  Matrix transition;
  Matrix emission;
};

struct HmmReduction {
  MomentSet moments;  // symmetrized three-view moments targeting view 3
  HmmEstimate estimate;
};

/// Coordinate split of rotated samples; view t holds a contiguous block of
/// the coordinates of rotation * x.
struct SplitBatch {
  TripleSampleBatch views;
  Matrix rotation;  // d x d orthogonal
};

// --- exchangeable single-topic documents ---------------------------------

// M2 = sum_j w_j mu_j (x) mu_j and M3 = sum_j w_j mu_j^{(x)3}, built exactly.
[[nodiscard]] MomentSet topic_population_moments(const TopicSpec& spec);

// Raw positional estimator over word-index documents: M3(i1,i2,i3) is the
// fraction of documents whose words at `positions` are (i1,i2,i3); M2 and m1
// use the first two / one of them. Unbiased for the population moments by
// exchangeability, for any choice of distinct positions.
[[nodiscard]] MomentSet topic_empirical_moments(
    const std::vector<std::vector<int>>& docs, std::size_t d,
    const std::array<std::size_t, 3>& positions = {0, 1, 2});

// --- spherical Gaussian mixtures ------------------------------------------

// Shared-covariance corrections from raw moments E[x], E[x (x) x],
// E[x^{(x)3}]: sigma_sq is the smallest eigenvalue of the covariance
// second - mean (x) mean, M2 = second - sigma_sq I, and M3 subtracts
// sigma_sq (mean (x) e_i (x) e_i + e_i (x) mean (x) e_i + e_i (x) e_i (x) mean)
// summed over i. On exact mixture moments both reduce to
// sum_j w_j mu_j^{(x)2,3}; m1 = sigma_sq * mean.
[[nodiscard]] MomentSet gmm_common_from_raw(const std::vector<double>& mean,
                                            const Matrix& second,
                                            const DenseTensor& third);

// Rows of `samples` are observations; n >= 2. Moments use the 1/n convention.
[[nodiscard]] MomentSet gmm_common_moments(const Matrix& samples);

// Per-component covariance variant: sigma_sq = smallest covariance
// eigenvalue, v its unit eigenvector (the solver's first under multiplicity),
// m1 = E[<v, x - mean>^2 x], and M3 subtracts the three m1 (x) e_i (x) e_i
// placements. On exact mixture moments m1 = sum_j w_j sigma_j^2 mu_j.
[[nodiscard]] MomentSet gmm_differing_from_raw(const std::vector<double>& mean,
                                               const Matrix& second,
                                               const DenseTensor& third);
[[nodiscard]] MomentSet gmm_differing_moments(const Matrix& samples);

// Haar-random rotation, then a split of the coordinates into three
// near-equal contiguous groups. Spherical mixtures stay product-form under
// rotation, so the views are conditionally independent given the component.
// Requires d >= 3; means stay full rank with probability 1 when d >= 3k.
[[nodiscard]] SplitBatch gmm_multiview_split(const Matrix& samples, std::uint64_t seed);

// Split pipeline: symmetrized view moments at rank k, view-3 means from the
// decomposition, views 1 and 2 by cross-moment regression, then the inverse
// rotation reassembles full mean vectors in the original coordinates.
[[nodiscard]] MixtureEstimate recover_split_means(const SplitBatch& split, std::size_t k,
                                                  const PowerConfig& cfg = {});

// --- independent component analysis ---------------------------------------

// Fourth cumulant of the sample rows: M4 = E^[x^{(x)4}] - T where
// T(i1,i2,i3,i4) sums the three pairings of raw second moments
// E^[x_a x_b] E^[x_c x_d]. m2 carries E^[x (x) x]. For x = A h + Gaussian
// noise with independent zero-mean unit-variance sources this converges to
// sum_j kappa_j a_j^{(x)4}.
[[nodiscard]] MomentSet ica_cumulant(const Matrix& samples);

// Exact M4 = sum_j kappa_j a_j^{(x)4}; m2 = A A^T + noise_sigma^2 I.
[[nodiscard]] MomentSet ica_population_moments(const IcaSpec& spec);

// M4(I, I, u, v): contract the last two modes down to a matrix.
[[nodiscard]] Matrix cumulant_contract(const MomentSet& ms, const std::vector<double>& u,
                                       const std::vector<double>& v);
// M4(I, I, I, v): contract the last mode down to an order-3 tensor.
[[nodiscard]] DenseTensor cumulant_contract(const MomentSet& ms,
                                            const std::vector<double>& v);

// --- latent Dirichlet allocation -------------------------------------------

// Concentration-corrected moments from raw positional cross moments
// pair_raw = E[x1 (x) x2] and triple_raw = E[x1 (x) x2 (x) x3]:
//   M2 = pair - a0/(a0+1) m1 (x) m1
//   M3 = triple - a0/(a0+2) (pair (x) m1 in each of the three placements)
//        + 2 a0^2/((a0+2)(a0+1)) m1^{(x)3}.
// On exact Dirichlet-mixture moments, M2 = sum_j alpha_j/((a0+1) a0)
// mu_j^{(x)2} and M3 = sum_j 2 alpha_j/((a0+2)(a0+1) a0) mu_j^{(x)3}.
[[nodiscard]] MomentSet lda_from_raw(const std::vector<double>& m1, const Matrix& pair_raw,
                                     const DenseTensor& triple_raw, double alpha0);

// Raw moments from the first three words of each document, then the alpha0
// corrections above. alpha0 must be known and positive.
[[nodiscard]] MomentSet lda_moments(const std::vector<std::vector<int>>& docs, std::size_t d,
                                    double alpha0);

// --- three-view mixtures ----------------------------------------------------

// Symmetrization toward the third view:
//   xt1 = E^[x3 (x) x2] pinv(E^[x1 (x) x2]) x1
//   xt2 = E^[x3 (x) x1] pinv(E^[x2 (x) x1]) x2
// with the pseudo-inverses truncated at rank k (k = 0 takes full rank).
// M2 = E^[xt1 (x) xt2], M3 = E^[xt1 (x) xt2 (x) x3]; in population both equal
// sum_j w_j mu_{3,j}^{(x)2,3}. Throws numerical_error when a cross covariance
// is singular at the requested rank.
[[nodiscard]] MomentSet multiview_symmetrized_moments(const TripleSampleBatch& batch,
                                                      std::size_t k = 0);

// Same construction from exact cross covariances B_s diag(w) B_t^T, with
// M3 = sum_j w_j (A mu_{1,j}) (x) (B mu_{2,j}) (x) mu_{3,j}.
[[nodiscard]] MomentSet multiview_population_moments(const MultiviewSpec& spec);

// Whiten m2, run the deflated power method on m3, and split the Kruskal
// output back into mixing weights and unnormalized means: with whitened
// eigenvalue lt_j and component scale s_j, w_j = 1/lt_j^2 and
// mu_j = lt_j s_j a_j. Inputs are symmetrized before whitening, so raw
// empirical moment sets are accepted as-is.
[[nodiscard]] MixtureEstimate learn_mixture(const MomentSet& ms, std::size_t k,
                                            const PowerConfig& cfg = {});

// --- hidden Markov chains ----------------------------------------------------

// Conditioning on the second hidden state turns the first three observations
// into a three-view mixture: weights = T pi, means2 = O, means3 = O T, and
// means1 = O diag(pi) T^T diag(T pi)^{-1}.
[[nodiscard]] MultiviewSpec hmm_multiview_spec(const HmmSpec& spec);

// Inverts that reduction on estimated quantities: emission = view-2 means,
// transition = pinv(emission) * view-3 means, initial = transition^{-1} w.
// Throws numerical_error when the transition estimate is singular.
[[nodiscard]] HmmEstimate hmm_postprocess(const std::vector<double>& mix_weights,
                                          const Matrix& view2_means,
                                          const Matrix& view3_means);

// First three observations of every sequence form the views; the symmetrized
// moments are decomposed at rank k for the view-3 means, views 1 and 2 follow
// by cross-moment regression, and hmm_postprocess assembles the estimates.
// Sequences are row-major, one observation per row, length >= 3.
[[nodiscard]] HmmReduction hmm_reduce(const std::vector<Matrix>& sequences, std::size_t k,
                                      const PowerConfig& cfg = {});

// --- noisy-or networks --------------------------------------------------------

// Pointwise mutual information of the absence events x_i = 0 over binary
// sample rows:
//   m2(i1,i2)    = log P(i1,i2) - log P(i1) - log P(i2)
//   m3(i1,i2,i3) = log P(i1,i2) + log P(i2,i3) + log P(i1,i3)
//                  - log P(i1,i2,i3) - log P(i1) - log P(i2) - log P(i3)
// with P estimated as (count + smoothing) / (n + 2 smoothing). smoothing = 0
// keeps raw frequencies and throws numerical_error on zero-probability
// events. Off-diagonal entries approximate rho F F^T + rho^2 G G^T with
// F = 1 - exp(-W), G = 1 - exp(-2W); entries with repeated indices collapse
// to -log P terms and do not follow that form.
[[nodiscard]] MomentSet noisy_or_pmi(const Matrix& samples, double smoothing = 0.5);

// Exact population PMI through the product form
// P(all of S absent) = prod_j (1 - rho + rho exp(-sum_{i in S} W_ij)).
[[nodiscard]] MomentSet noisy_or_population_pmi(const NoisyOrSpec& spec);

// --- samplers ------------------------------------------------------------------

// Every sampler keys its draws by sample index through Rng::stream(seed, s, .),
// so generation shards over samples and merges deterministically.
[[nodiscard]] std::vector<std::vector<int>> sample_topic(const TopicSpec& spec,
                                                         std::size_t docs, std::size_t words,
                                                         std::uint64_t seed);
[[nodiscard]] Matrix sample_gmm(const GmmSpec& spec, std::size_t n, std::uint64_t seed);
[[nodiscard]] std::vector<std::vector<int>> sample_lda(const LdaSpec& spec, std::size_t docs,
                                                       std::size_t words, std::uint64_t seed);
// Gaussian view noise of width noise_sigma around the conditional means.
[[nodiscard]] TripleSampleBatch sample_multiview(const MultiviewSpec& spec, std::size_t n,
                                                 double noise_sigma, std::uint64_t seed);
// Sequences of `length` observations x_t = O e_{y_t} + noise_sigma z.
[[nodiscard]] std::vector<Matrix> sample_hmm(const HmmSpec& spec, std::size_t sequences,
                                             std::size_t length, double noise_sigma,
                                             std::uint64_t seed);
[[nodiscard]] Matrix sample_ica(const IcaSpec& spec, std::size_t n, std::uint64_t seed);
// Binary n x d rows with Pr[x_i = 0 | h] = exp(-<W_i, h>).
[[nodiscard]] Matrix sample_noisy_or(const NoisyOrSpec& spec, std::size_t n,
                                     std::uint64_t seed);

// --- corpus text format ---------------------------------------------------------

// One document per line, whitespace-separated 0-based word indices. Blank
// lines are skipped on read. Throws validation_error on malformed tokens.
[[nodiscard]] std::vector<std::vector<int>> parse_corpus(std::istream& in);
void write_corpus(std::ostream& out, const std::vector<std::vector<int>>& docs);

}  // namespace cpd
