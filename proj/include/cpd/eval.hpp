// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cpd/als.hpp"
#include "cpd/matrix.hpp"
#include "cpd/report.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

// Outcome of aligning estimated components with a reference set. Estimated
// column j corresponds to reference column permutation[j]; signs[j] is +-1
// chosen so the matched inner product is nonnegative; errors[j] is
// || truth[:, permutation[j]] - signs[j] * est[:, j] ||_2.
struct MatchResult {
  std::vector<std::size_t> permutation;
  std::vector<double> signs;
  std::vector<double> errors;

  [[nodiscard]] double max_error() const;
};

// Optimal sign-blind column alignment: minimizes sum_j (1 - |cos|) over all
// bijections via an O(k^3) assignment solve. Both matrices must be d x k
// with nonzero columns; throws validation_error on shape mismatch.
[[nodiscard]] MatchResult match_components(const Matrix& truth, const Matrix& est);

// Minimum-cost perfect matching on a square cost matrix; result[row] = column.
[[nodiscard]] std::vector<std::size_t> assignment_solve(const Matrix& cost);

// Ground truth handed to the sweep harness: exact symmetric third moment t,
// exact second moment m, unit component columns, and component weights of t.
struct SweepInstance {
  DenseTensor t;
  Matrix m;
  Matrix components;
  std::vector<double> weights;
};

struct SweepCell {
  double epsilon = 0;
  std::uint64_t seed = 0;
  double max_vector_error = 0;  // NaN when failed
  double max_weight_error = 0;  // NaN when failed
  bool failed = false;
  std::string note;
};

// Sweep results, cells sorted by (epsilon, seed). slope is the least squares
// log-log fit of mean matched error against epsilon over the successful
// nonzero-epsilon cells (NaN when fewer than two distinct epsilons survive).
struct SweepTable {
  std::vector<SweepCell> cells;
  double slope = 0;

  // Header plus one row per cell; status column is "ok" or "failed".
  [[nodiscard]] std::string csv() const;
};

using SweepBuilder = std::function<SweepInstance()>;
using SweepDecomposer =
    std::function<std::pair<KruskalForm, DecompositionReport>(const DenseTensor&, const Matrix&)>;

// For every (epsilon, seed) pair: adds an independent random symmetric
// perturbation to both t and m, each scaled so its spectral norm estimate
// equals epsilon, runs the decomposer, and records the max matched component
// and weight errors. Decomposition failures are recorded per cell, never
// rethrown. Cell order is deterministic regardless of input grid order.
[[nodiscard]] SweepTable perturbation_sweep(const SweepBuilder& builder,
                                            const SweepDecomposer& decomposer,
                                            std::vector<double> epsilons,
                                            std::vector<std::uint64_t> seeds);

// 8-bit RGB raster, row major, 3 bytes per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;
};

// Binary P6 with maxval 255. The reader accepts '#' comments and arbitrary
// header whitespace; the writer emits the canonical "P6\nW H\n255\n" header,
// so write -> read -> write is byte identical. Malformed input throws
// validation_error.
[[nodiscard]] Image read_ppm(std::istream& in);
void write_ppm(std::ostream& out, const Image& img);
[[nodiscard]] Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

// height x width x 3 tensor of byte values as doubles, and the reverse tone
// map: shift so the minimum is 0, scale so the maximum is 255, truncate.
[[nodiscard]] DenseTensor image_tensor(const Image& img);
[[nodiscard]] Image render_image(const DenseTensor& t);

struct CompressionStats {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t parameters = 0;  // rank * (height + width + 3) + rank
  double ratio = 0;            // height * width * 3 / parameters
  double relative_error = 0;   // Frobenius, reconstruction vs input
  std::size_t sweeps = 0;
  double seconds = 0;
};

// Reads a P6 image, fits a rank-`rank` model with alternating least squares,
// writes the factor file and the tone-mapped reconstruction. cfg.rank is
// overridden by `rank`. Throws validation_error for rank 0 or unreadable
// input.
CompressionStats compress_image(const std::string& ppm_in, std::size_t rank, AlsConfig cfg,
                                const std::string& factors_out, const std::string& ppm_out);

// JSON factor files. Layout: {"rank": k, "weights": [...], "factors": [mode]
// [column][entry], "report": {...}}. Weights are stored nonnegative with any
// sign folded into the leading factor column. Report fields that are unset
// (NaN) or empty are omitted and come back unset. Serialization is
// deterministic, so write -> read -> write is byte identical.
[[nodiscard]] std::string factors_to_json(const KruskalForm& kf, const DecompositionReport& report);
[[nodiscard]] std::pair<KruskalForm, DecompositionReport> factors_from_json(const std::string& text);
void save_factors(const std::string& path, const KruskalForm& kf, const DecompositionReport& report);
[[nodiscard]] std::pair<KruskalForm, DecompositionReport> load_factors(const std::string& path);

}  // namespace cpd
