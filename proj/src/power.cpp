// SPDX-License-Identifier: MIT
#include "cpd/power.hpp"

#include <chrono>
#include <cmath>

namespace cpd {

namespace {

struct DenseOracle {
  const DenseTensor& t;
  [[nodiscard]] std::vector<double> apply(const std::vector<double>& theta) const {
    return cpd::apply(t, theta, theta);
  }
};

void require_symmetric_tensor(const DenseTensor& t, const char* who) {
  if (t.order() != 3 || t.dims[0] != t.dims[1] || t.dims[1] != t.dims[2])
    throw validation_error(std::string(who) + ": cubic order-3 tensor required");
  if (symmetry_defect(t) > 1e-8)
    throw validation_error(std::string(who) +
                           ": tensor is not symmetric; symmetrize or whiten it first");
}

}  // namespace

namespace detail {

void validate_power_config(std::size_t restarts, std::size_t iterations, double tol) {
  if (restarts < 1) throw validation_error("power: restarts must be >= 1");
  if (iterations < 1) throw validation_error("power: iterations must be >= 1");
  if (!(tol > 0.0)) throw validation_error("power: tol must be > 0");
}

}  // namespace detail

std::size_t default_restarts(std::size_t k) {
  if (k < 1) k = 1;
  const double lk = std::log(static_cast<double>(k));
  return 10 * k * (static_cast<std::size_t>(std::ceil(lk)) + 1);
}

std::vector<double> power_step(const DenseTensor& t, const std::vector<double>& theta) {
  std::vector<double> image = apply(t, theta, theta);
  const double nrm = norm2(image);
  if (nrm == 0.0) throw numerical_error("power_step: zero image");
  for (auto& x : image) x /= nrm;
  return image;
}

EigenPair extract_eigenpair(const DenseTensor& t, const PowerConfig& cfg) {
  require_symmetric_tensor(t, "extract_eigenpair");
  const std::size_t restarts = cfg.restarts ? cfg.restarts : default_restarts(1);
  detail::validate_power_config(restarts, cfg.iterations, cfg.tol);
  DenseOracle oracle{t};
  return detail::extract_round(oracle, t.dims[0], restarts, cfg.iterations, cfg.tol, cfg.seed, 0,
                               nullptr, nullptr);
}

DenseTensor deflate(const DenseTensor& t, const EigenPair& pair) {
  if (t.order() != 3) throw validation_error("deflate: order-3 tensor required");
  const std::size_t d = t.dims[0];
  if (pair.eigenvector.size() != d || t.dims[1] != d || t.dims[2] != d)
    throw validation_error("deflate: dimension mismatch");
  const std::vector<double>& v = pair.eigenvector;
  DenseTensor out = t;
  for (std::size_t i = 0; i < d; ++i) {
    const double li = pair.eigenvalue * v[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double lij = li * v[j];
      double* row = &out.data[(i * d + j) * d];
      for (std::size_t l = 0; l < d; ++l) row[l] -= lij * v[l];
    }
  }
  return out;
}

std::pair<KruskalForm, DecompositionReport> decompose_orthogonal(const DenseTensor& t,
                                                                 std::size_t k,
                                                                 const PowerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  require_symmetric_tensor(t, "decompose_orthogonal");
  if (k < 1) throw validation_error("decompose_orthogonal: rank must be >= 1");
  if (cfg.deflation_rounds && cfg.deflation_rounds != k)
    throw validation_error("decompose_orthogonal: deflation_rounds disagrees with rank");
  const std::size_t restarts = cfg.restarts ? cfg.restarts : default_restarts(k);
  detail::validate_power_config(restarts, cfg.iterations, cfg.tol);

  const std::size_t d = t.dims[0];
  DecompositionReport report;
  report.restarts = restarts;
  report.notes.push_back("restart budget is an engineering default, not a proved bound");

  KruskalForm out{std::vector<double>(k), {Matrix(d, k), Matrix(d, k), Matrix(d, k)}};
  DenseTensor work = t;
  for (std::size_t s = 0; s < k; ++s) {
    DenseOracle oracle{work};
    std::size_t chosen = 0;
    EigenPair pair = detail::extract_round(oracle, d, restarts, cfg.iterations, cfg.tol, cfg.seed,
                                           s, &report.iterations, &chosen);
    detail::fold_sign(pair);
    work = deflate(work, pair);
    out.weights[s] = pair.eigenvalue;
    for (std::size_t m = 0; m < 3; ++m) out.factors[m].set_column(s, pair.eigenvector);
    report.chosen_restarts.push_back(chosen);
    report.per_component_residual.push_back(frobenius_norm(work));
  }
  report.deflation_residual_fro = frobenius_norm(work);
  DenseTensor rec = kruskal_to_tensor(out);
  for (std::size_t i = 0; i < rec.size(); ++i) rec.data[i] = t.data[i] - rec.data[i];
  report.residual_fro = frobenius_norm(rec);
  report.residual_spectral_est = spectral_norm_estimate(rec);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(out), std::move(report)};
}

}  // namespace cpd
