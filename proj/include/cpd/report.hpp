// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace cpd {

// Diagnostics attached to a decomposition result. Scalar fields default to
// NaN meaning "not applicable"; serializers skip non-finite values.
struct DecompositionReport {
  static constexpr double unset = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> permutation;  // filled by matching; bijection on [k]
  std::vector<double> vector_errors;
  std::vector<double> weight_errors;

  double residual_fro = unset;            // recomputed from the returned factors
  double deflation_residual_fro = unset;  // incremental bookkeeping
  double residual_spectral_est = unset;   // power-iteration estimate, not exact
  std::vector<double> per_component_residual;

  std::size_t iterations = 0;                 // inner iterations or sweeps
  std::size_t restarts = 0;                   // restarts per deflation round
  std::vector<std::size_t> chosen_restarts;   // winning restart id per round

  double sigma_min_m = unset;
  double lambda_min = unset;
  double lambda_max = unset;
  std::vector<double> scale_invariant_weights;
  std::vector<double> component_scales;

  std::vector<double> sweep_errors;  // relative reconstruction error per sweep

  double seconds = unset;
  std::vector<std::string> notes;
};

}  // namespace cpd
