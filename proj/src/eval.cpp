// SPDX-License-Identifier: MIT
#include "cpd/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpd/errors.hpp"
#include "cpd/rng.hpp"
#include "cpd/svd.hpp"

namespace cpd {

namespace {

constexpr std::uint64_t kTagSweepTensor = 21;
constexpr std::uint64_t kTagSweepMatrix = 22;

double column_dot(const Matrix& a, std::size_t ja, const Matrix& b, std::size_t jb) {
  double dp = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) dp += a(i, ja) * b(i, jb);
  return dp;
}

double column_norm(const Matrix& a, std::size_t j) {
  return std::sqrt(column_dot(a, j, a, j));
}

// Gaussian entries on the sorted-index orbit representatives, copied to every
// permutation slot so the result is bitwise symmetric.
DenseTensor random_symmetric_tensor(std::size_t d, std::uint64_t seed) {
  Rng rng(Rng::stream(seed, kTagSweepTensor, 0));
  DenseTensor t({d, d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j)
      for (std::size_t l = j; l < d; ++l) {
        double v = rng.gaussian();
        if (i == j && j == l) {
          t(i, j, l) = v;
        } else if (i == j) {
          t(i, i, l) = v;
          t(i, l, i) = v;
          t(l, i, i) = v;
        } else if (j == l) {
          t(i, j, j) = v;
          t(j, i, j) = v;
          t(j, j, i) = v;
        } else {
          t(i, j, l) = v;
          t(i, l, j) = v;
          t(j, i, l) = v;
          t(j, l, i) = v;
          t(l, i, j) = v;
          t(l, j, i) = v;
        }
      }
  return t;
}

Matrix random_symmetric_matrix(std::size_t d, std::uint64_t seed) {
  Rng rng(Rng::stream(seed, kTagSweepMatrix, 0));
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double v = rng.gaussian();
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

nlohmann::json report_to_json(const DecompositionReport& r) {
  nlohmann::json j = nlohmann::json::object();
  auto put_scalar = [&j](const char* key, double v) {
    if (std::isfinite(v)) j[key] = v;
  };
  auto put_vec = [&j](const char* key, const std::vector<double>& v) {
    if (!v.empty()) j[key] = v;
  };
  if (!r.permutation.empty()) j["permutation"] = r.permutation;
  put_vec("vector_errors", r.vector_errors);
  put_vec("weight_errors", r.weight_errors);
  put_scalar("residual_fro", r.residual_fro);
  put_scalar("deflation_residual_fro", r.deflation_residual_fro);
  put_scalar("residual_spectral_est", r.residual_spectral_est);
  put_vec("per_component_residual", r.per_component_residual);
  j["iterations"] = r.iterations;
  j["restarts"] = r.restarts;
  if (!r.chosen_restarts.empty()) j["chosen_restarts"] = r.chosen_restarts;
  put_scalar("sigma_min_m", r.sigma_min_m);
  put_scalar("lambda_min", r.lambda_min);
  put_scalar("lambda_max", r.lambda_max);
  put_vec("scale_invariant_weights", r.scale_invariant_weights);
  put_vec("component_scales", r.component_scales);
  put_vec("sweep_errors", r.sweep_errors);
  put_scalar("seconds", r.seconds);
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

std::vector<double> json_doubles(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array()) throw validation_error(std::string("factors json: ") + what + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& el : arr) {
    if (el.is_null()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    } else if (el.is_number()) {
      out.push_back(el.get<double>());
    } else {
      throw validation_error(std::string("factors json: ") + what + " holds a non-numeric entry");
    }
  }
  return out;
}

DecompositionReport report_from_json(const nlohmann::json& j) {
  DecompositionReport r;
  if (!j.is_object()) throw validation_error("factors json: report must be an object");
  auto get_scalar = [&j](const char* key, double& slot) {
    if (j.contains(key)) slot = j.at(key).get<double>();
  };
  auto get_vec = [&j](const char* key, std::vector<double>& slot) {
    if (j.contains(key)) slot = json_doubles(j.at(key), key);
  };
  if (j.contains("permutation")) r.permutation = j.at("permutation").get<std::vector<std::size_t>>();
  get_vec("vector_errors", r.vector_errors);
  get_vec("weight_errors", r.weight_errors);
  get_scalar("residual_fro", r.residual_fro);
  get_scalar("deflation_residual_fro", r.deflation_residual_fro);
  get_scalar("residual_spectral_est", r.residual_spectral_est);
  get_vec("per_component_residual", r.per_component_residual);
  if (j.contains("iterations")) r.iterations = j.at("iterations").get<std::size_t>();
  if (j.contains("restarts")) r.restarts = j.at("restarts").get<std::size_t>();
  if (j.contains("chosen_restarts"))
    r.chosen_restarts = j.at("chosen_restarts").get<std::vector<std::size_t>>();
  get_scalar("sigma_min_m", r.sigma_min_m);
  get_scalar("lambda_min", r.lambda_min);
  get_scalar("lambda_max", r.lambda_max);
  get_vec("scale_invariant_weights", r.scale_invariant_weights);
  get_vec("component_scales", r.component_scales);
  get_vec("sweep_errors", r.sweep_errors);
  get_scalar("seconds", r.seconds);
  if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

std::size_t ppm_number(std::istream& in) {
  int c = in.get();
  while (c != EOF && (std::isspace(static_cast<unsigned char>(c)) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || !std::isdigit(static_cast<unsigned char>(c)))
    throw validation_error("ppm: expected an unsigned integer in the header");
  std::size_t v = 0;
  while (c != EOF && std::isdigit(static_cast<unsigned char>(c))) {
    v = v * 10 + static_cast<std::size_t>(c - '0');
    if (v > (std::size_t{1} << 32)) throw validation_error("ppm: header value out of range");
    c = in.get();
  }
  if (c != EOF) in.unget();
  return v;
}

}  // namespace

double MatchResult::max_error() const {
  double m = 0;
  for (double e : errors) m = std::max(m, e);
  return m;
}

std::vector<std::size_t> assignment_solve(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw validation_error("assignment: cost matrix must be square");
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials; p[j] is the row
  // matched to column j, index 0 is the virtual unmatched slot.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result[p[j] - 1] = j - 1;
  return result;
}

MatchResult match_components(const Matrix& truth, const Matrix& est) {
  if (truth.rows() != est.rows() || truth.cols() != est.cols())
    throw validation_error("match: truth and estimate must have identical shapes");
  const std::size_t d = truth.rows();
  const std::size_t k = truth.cols();
  if (k == 0) return {};
  Matrix cost(k, k);
  for (std::size_t je = 0; je < k; ++je) {
    double ne = column_norm(est, je);
    for (std::size_t jt = 0; jt < k; ++jt) {
      double nt = column_norm(truth, jt);
      double denom = ne * nt;
      double cosab = denom > 0 ? column_dot(truth, jt, est, je) / denom : 0.0;
      cost(je, jt) = 1.0 - std::fabs(cosab);
    }
  }
  MatchResult r;
  r.permutation = assignment_solve(cost);
  r.signs.resize(k);
  r.errors.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t t = r.permutation[j];
    double s = column_dot(truth, t, est, j) >= 0 ? 1.0 : -1.0;
    r.signs[j] = s;
    double acc = 0;
    for (std::size_t i = 0; i < d; ++i) {
      double diff = truth(i, t) - s * est(i, j);
      acc += diff * diff;
    }
    r.errors[j] = std::sqrt(acc);
  }
  return r;
}

std::string SweepTable::csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epsilon,seed,max_vector_error,max_weight_error,status\n";
  for (const auto& cell : cells) {
    out << cell.epsilon << ',' << cell.seed << ',' << cell.max_vector_error << ','
        << cell.max_weight_error << ',' << (cell.failed ? "failed" : "ok") << '\n';
  }
  return out.str();
}

SweepTable perturbation_sweep(const SweepBuilder& builder, const SweepDecomposer& decomposer,
                              std::vector<double> epsilons, std::vector<std::uint64_t> seeds) {
  if (!builder || !decomposer) throw validation_error("sweep: builder and decomposer are required");
  if (epsilons.empty() || seeds.empty())
    throw validation_error("sweep: epsilon and seed grids must be nonempty");
  SweepInstance inst = builder();
  if (inst.t.order() != 3) throw validation_error("sweep: instance tensor must have order 3");
  const std::size_t d = inst.t.dims()[0];
  if (inst.t.dims()[1] != d || inst.t.dims()[2] != d)
    throw validation_error("sweep: instance tensor must be cubic");
  if (inst.m.rows() != d || inst.m.cols() != d)
    throw validation_error("sweep: second moment shape does not match the tensor");
  const std::size_t k = inst.components.cols();
  if (inst.components.rows() != d || inst.weights.size() != k)
    throw validation_error("sweep: components and weights disagree with the tensor dimension");
  for (double eps : epsilons)
    if (!(eps >= 0)) throw validation_error("sweep: epsilons must be nonnegative");

  std::sort(epsilons.begin(), epsilons.end());
  epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  SweepTable table;
  for (double eps : epsilons) {
    for (std::uint64_t seed : seeds) {
      SweepCell cell;
      cell.epsilon = eps;
      cell.seed = seed;
      DenseTensor tp = inst.t;
      Matrix mp = inst.m;
      if (eps > 0) {
        DenseTensor noise = random_symmetric_tensor(d, seed);
        double scale = spectral_norm_estimate(noise);
        if (scale <= 0) throw numerical_error("sweep: degenerate tensor perturbation");
        double c = eps / scale;
        for (std::size_t i = 0; i < tp.data().size(); ++i) tp.data()[i] += c * noise.data()[i];
        Matrix mnoise = random_symmetric_matrix(d, seed);
        SymEigResult eig = symmetric_eig(mnoise);
        double mscale = 0;
        for (double ev : eig.values) mscale = std::max(mscale, std::fabs(ev));
        if (mscale <= 0) throw numerical_error("sweep: degenerate matrix perturbation");
        double cm = eps / mscale;
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) mp(i, j) += cm * mnoise(i, j);
      }
      try {
        auto [kf, rep] = decomposer(tp, mp);
        (void)rep;
        if (kf.factors.empty() || kf.factors[0].rows() != d || kf.factors[0].cols() != k ||
            kf.weights.size() != k)
          throw numerical_error("sweep: decomposer returned mismatched rank or dimension");
        MatchResult match = match_components(inst.components, kf.factors[0]);
        cell.max_vector_error = match.max_error();
        double werr = 0;
        for (std::size_t j = 0; j < k; ++j)
          werr = std::max(werr, std::fabs(inst.weights[match.permutation[j]] - kf.weights[j]));
        cell.max_weight_error = werr;
      } catch (const std::exception& ex) {
        cell.failed = true;
        cell.max_vector_error = nan;
        cell.max_weight_error = nan;
        cell.note = ex.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }

  // Log-log regression of mean matched error against epsilon.
  std::vector<double> xs, ys;
  for (double eps : epsilons) {
    if (eps <= 0) continue;
    double acc = 0;
    std::size_t cnt = 0;
    for (const auto& cell : table.cells) {
      if (cell.epsilon == eps && !cell.failed) {
        acc += cell.max_vector_error;
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    double mean = acc / static_cast<double>(cnt);
    if (mean <= 0) continue;
    xs.push_back(std::log(eps));
    ys.push_back(std::log(mean));
  }
  if (xs.size() >= 2) {
    double xbar = 0, ybar = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xbar += xs[i];
      ybar += ys[i];
    }
    xbar /= static_cast<double>(xs.size());
    ybar /= static_cast<double>(xs.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      num += (xs[i] - xbar) * (ys[i] - ybar);
      den += (xs[i] - xbar) * (xs[i] - xbar);
    }
    table.slope = den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
  } else {
    table.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

Image read_ppm(std::istream& in) {
  int c0 = in.get();
  int c1 = in.get();
  if (c0 != 'P' || c1 != '6') throw validation_error("ppm: not a binary P6 file");
  std::size_t width = ppm_number(in);
  std::size_t height = ppm_number(in);
  std::size_t maxval = ppm_number(in);
  if (width == 0 || height == 0) throw validation_error("ppm: image dimensions must be positive");
  if (maxval != 255) throw validation_error("ppm: only 8-bit images (maxval 255) are supported");
  int sep = in.get();
  if (sep == EOF || !std::isspace(static_cast<unsigned char>(sep)))
    throw validation_error("ppm: missing whitespace before the pixel payload");
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(width * height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.rgb.size())
    throw validation_error("ppm: pixel payload is truncated");
  return img;
}

void write_ppm(std::ostream& out, const Image& img) {
  if (img.width == 0 || img.height == 0)
    throw validation_error("ppm: image dimensions must be positive");
  if (img.rgb.size() != img.width * img.height * 3)
    throw validation_error("ppm: pixel buffer size disagrees with the dimensions");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw validation_error("ppm: write failed");
}

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("ppm: cannot open " + path);
  return read_ppm(in);
}

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("ppm: cannot open " + path + " for writing");
  write_ppm(out, img);
}

DenseTensor image_tensor(const Image& img) {
  if (img.rgb.size() != img.width * img.height * 3)
    throw validation_error("image: pixel buffer size disagrees with the dimensions");
  DenseTensor t({img.height, img.width, 3});
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        t(r, c, ch) = static_cast<double>(img.rgb[(r * img.width + c) * 3 + ch]);
  return t;
}

Image render_image(const DenseTensor& t) {
  if (t.order() != 3 || t.dims()[2] != 3)
    throw validation_error("image: tensor must be height x width x 3");
  const std::size_t h = t.dims()[0];
  const std::size_t w = t.dims()[1];
  double mn = t.data()[0], mx = t.data()[0];
  for (double v : t.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double range = mx - mn;
  Image img;
  img.height = h;
  img.width = w;
  img.rgb.resize(h * w * 3);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = range > 0 ? (t(r, c, ch) - mn) / range * 255.0 : 0.0;
        v = std::trunc(v);
        v = std::max(0.0, std::min(255.0, v));
        img.rgb[(r * w + c) * 3 + ch] = static_cast<std::uint8_t>(v);
      }
  return img;
}

CompressionStats compress_image(const std::string& ppm_in, std::size_t rank, AlsConfig cfg,
                                const std::string& factors_out, const std::string& ppm_out) {
  if (rank == 0) throw validation_error("compress: rank must be positive");
  Image img = load_ppm(ppm_in);
  DenseTensor t = image_tensor(img);
  cfg.rank = rank;
  auto start = std::chrono::steady_clock::now();
  auto [kf, report] = als(t, cfg);
  DenseTensor rec = kruskal_to_tensor(kf);
  double diff2 = 0, ref2 = 0;
  for (std::size_t i = 0; i < t.data().size(); ++i) {
    double dlt = t.data()[i] - rec.data()[i];
    diff2 += dlt * dlt;
    ref2 += t.data()[i] * t.data()[i];
  }
  auto stop = std::chrono::steady_clock::now();
  CompressionStats stats;
  stats.height = img.height;
  stats.width = img.width;
  stats.parameters = rank * (img.height + img.width + 3) + rank;
  stats.ratio = static_cast<double>(img.height * img.width * 3) /
                static_cast<double>(stats.parameters);
  stats.relative_error = ref2 > 0 ? std::sqrt(diff2 / ref2) : 0.0;
  stats.sweeps = report.sweep_errors.size();
  stats.seconds = std::chrono::duration<double>(stop - start).count();
  report.seconds = stats.seconds;
  save_factors(factors_out, kf, report);
  save_ppm(ppm_out, render_image(rec));
  return stats;
}

std::string factors_to_json(const KruskalForm& kf, const DecompositionReport& report) {
  const std::size_t k = kf.weights.size();
  if (kf.factors.empty()) throw validation_error("factors json: no factor matrices");
  for (const auto& f : kf.factors)
    if (f.cols() != k)
      throw validation_error("factors json: factor column count disagrees with the weights");
  KruskalForm folded = kf;
  for (std::size_t j = 0; j < k; ++j) {
    if (folded.weights[j] < 0) {
      folded.weights[j] = -folded.weights[j];
      for (std::size_t i = 0; i < folded.factors[0].rows(); ++i)
        folded.factors[0](i, j) = -folded.factors[0](i, j);
    }
  }
  nlohmann::json j;
  j["rank"] = k;
  j["weights"] = folded.weights;
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& f : folded.factors) {
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t col = 0; col < f.cols(); ++col) {
      nlohmann::json entries = nlohmann::json::array();
      for (std::size_t row = 0; row < f.rows(); ++row) entries.push_back(f(row, col));
      cols.push_back(std::move(entries));
    }
    modes.push_back(std::move(cols));
  }
  j["factors"] = std::move(modes);
  j["report"] = report_to_json(report);
  return j.dump(2) + "\n";
}

std::pair<KruskalForm, DecompositionReport> factors_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw validation_error(std::string("factors json: parse failure: ") + ex.what());
  }
  try {
    if (!j.is_object() || !j.contains("rank") || !j.contains("weights") || !j.contains("factors"))
      throw validation_error("factors json: rank, weights, and factors are required");
    KruskalForm kf;
    const std::size_t k = j.at("rank").get<std::size_t>();
    kf.weights = json_doubles(j.at("weights"), "weights");
    if (kf.weights.size() != k)
      throw validation_error("factors json: rank disagrees with the weight count");
    const auto& modes = j.at("factors");
    if (!modes.is_array() || modes.empty())
      throw validation_error("factors json: factors must be a nonempty array of modes");
    for (const auto& mode : modes) {
      if (!mode.is_array() || mode.size() != k)
        throw validation_error("factors json: each mode needs one column per component");
      std::vector<std::vector<double>> cols;
      cols.reserve(k);
      for (const auto& col : mode) cols.push_back(json_doubles(col, "factor column"));
      const std::size_t rows = cols.empty() ? 0 : cols[0].size();
      for (const auto& col : cols)
        if (col.size() != rows || rows == 0)
          throw validation_error("factors json: ragged or empty factor columns");
      Matrix f(rows, k);
      for (std::size_t col = 0; col < k; ++col)
        for (std::size_t row = 0; row < rows; ++row) f(row, col) = cols[col][row];
      kf.factors.push_back(std::move(f));
    }
    DecompositionReport rep;
    if (j.contains("report")) rep = report_from_json(j.at("report"));
    return {std::move(kf), std::move(rep)};
  } catch (const nlohmann::json::exception& ex) {
    throw validation_error(std::string("factors json: malformed document: ") + ex.what());
  }
}

void save_factors(const std::string& path, const KruskalForm& kf,
                  const DecompositionReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("factors json: cannot open " + path + " for writing");
  out << factors_to_json(kf, report);
  if (!out) throw validation_error("factors json: write failed for " + path);
}

std::pair<KruskalForm, DecompositionReport> load_factors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("factors json: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return factors_from_json(buf.str());
}

}  // namespace cpd
