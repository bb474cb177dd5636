#pragma once

// Experiment drivers behind the command-line tool: translation-distance
// sweeps, single-outlier sweeps, invertible-map grids, and the CSV / manifest
// writers they share.

#include "ckasens/core.hpp"
#include "ckasens/similarity.hpp"
#include "ckasens/synthetic.hpp"
#include "ckasens/theory.hpp"
#include "ckasens/transforms.hpp"

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ckasens::harness {

inline constexpr const char* kToolVersion = "0.3.0";

enum class DirectionMode { Random, MarginPreserving };

/// Bandwidth source for the translated set in RBF sweeps. PerRepresentation
/// applies the median rule to each matrix separately; Reference reuses the
/// bandwidth of the untranslated X.
enum class RbfBandwidth { PerRepresentation, Reference };

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) {
    throw Error(ErrorCode::InvalidMatrix, "geometric grid needs 0 < lo < hi and >= 2 points");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double ratio = std::log(hi / lo) / (points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(ratio * i);
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

/// Default sweep grid: 20 points from 0.1 to 1e4, in units of the RMS row norm.
inline std::vector<double> default_distance_grid() { return geometric_grid(0.1, 1e4, 20); }

struct SweepConfig {
  SubsetMask subset;  // true = S (fixed); the complement moves
  DirectionMode direction_mode = DirectionMode::Random;
  std::optional<Hyperplane> hyperplane;  // needed for MarginPreserving, used for margin_ok
  std::vector<double> distances = default_distance_grid();  // relative to RMS norm of X
  std::vector<double> rbf_fractions;
  RbfBandwidth rbf_bandwidth = RbfBandwidth::PerRepresentation;
  std::uint64_t seed = 0;
  std::optional<LimitPrediction> limit_override;  // outlier sweeps supply their own
};

struct SweepRow {
  double distance = 0.0;           // relative to RMS norm
  double absolute_distance = 0.0;  // c
  double cka_linear = 0.0;
  std::vector<double> cka_rbf;  // one per configured fraction
  double predicted_limit = 0.0;
  std::optional<bool> margin_ok;
  double max_projection_change = 0.0;
};

struct SweepResult {
  std::vector<double> rbf_fractions;
  std::vector<SweepRow> rows;
  LimitPrediction limit;
  Vector direction;
  double rms_norm = 0.0;
};

namespace detail {

struct CenteredKernel {
  Matrix centered;
  double sq_norm = 0.0;
  double sigma = 0.0;
};

inline CenteredKernel centered_rbf(const Matrix& sq_distances, double sigma) {
  CenteredKernel k;
  k.sigma = sigma;
  k.centered = ckasens::detail::rbf_from_sq_distances(sq_distances, sigma);
  double_center_in_place(k.centered);
  k.sq_norm = k.centered.squaredNorm();
  return k;
}

inline double aligned(const CenteredKernel& a, const CenteredKernel& b) {
  if (!(a.sq_norm > 0.0) || !(b.sq_norm > 0.0)) {
    throw Error(ErrorCode::DegenerateData, "zero self-HSIC (constant representation)");
  }
  return std::clamp(a.centered.cwiseProduct(b.centered).sum() / std::sqrt(a.sq_norm * b.sq_norm), 0.0,
                    1.0);
}

}  // namespace detail

inline void validate_distances(const std::vector<double>& distances) {
  if (distances.empty()) throw Error(ErrorCode::InvalidMatrix, "empty distance grid");
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] >= 0.0) || !std::isfinite(distances[i]) ||
        (i > 0 && !(distances[i] > distances[i - 1]))) {
      throw Error(ErrorCode::InvalidMatrix, "distances must be finite, >= 0 and strictly increasing");
    }
  }
}

/// For each distance d: translate X \ S by d * rms(X) along one fixed unit
/// direction, recenter, and compare with X under linear and RBF CKA.
inline SweepResult run_sweep(const RepresentationMatrix& x_in, const SweepConfig& cfg) {
  validate_distances(cfg.distances);
  const auto x = center_columns(x_in);
  if (cfg.subset.size() != static_cast<std::size_t>(x.rows()) || !cfg.subset.proper()) {
    throw Error(ErrorCode::InvalidSubset, "subset mask must match rows and be a proper subset");
  }

  SweepResult result;
  result.rbf_fractions = cfg.rbf_fractions;
  result.rms_norm = x.rms_norm();
  result.limit = cfg.limit_override ? *cfg.limit_override : predict_limit(x, cfg.subset);

  SeededRng rng(cfg.seed, 1);
  if (cfg.direction_mode == DirectionMode::MarginPreserving) {
    if (!cfg.hyperplane) throw Error(ErrorCode::InvalidMatrix, "margin-preserving sweep needs a hyperplane");
    result.direction = margin_preserving_direction(*cfg.hyperplane, rng);
  } else {
    result.direction = sample_unit_direction(rng, x.cols());
  }

  std::vector<detail::CenteredKernel> x_kernels;
  Matrix x_sq;
  if (!cfg.rbf_fractions.empty()) {
    x_sq = pairwise_sq_distances(x.data());
    const double median = ckasens::detail::bandwidth_from_sq_distances(x_sq, 1.0);
    for (double f : cfg.rbf_fractions) x_kernels.push_back(detail::centered_rbf(x_sq, f * median));
  }

  std::optional<SeparationReport> base_report;
  Vector base_projection;
  if (cfg.hyperplane) {
    base_report = check_separation(x, *cfg.hyperplane, cfg.subset);
    base_projection = x.data() * cfg.hyperplane->normal;
  }

  for (double d : cfg.distances) {
    SweepRow row;
    row.distance = d;
    row.absolute_distance = d * result.rms_norm;
    const auto moved = subset_translate(x, {cfg.subset, result.direction, row.absolute_distance});

    if (cfg.hyperplane) {
      const double bound = 1e-9 * cfg.hyperplane->normal.norm() * (1.0 + row.absolute_distance);
      const Vector proj = moved.data() * cfg.hyperplane->normal;
      row.max_projection_change = (proj - base_projection).cwiseAbs().maxCoeff();
      const auto report = check_separation(moved, *cfg.hyperplane, cfg.subset);
      row.margin_ok = row.max_projection_change < bound &&
                      std::abs(report.margin_s - base_report->margin_s) < bound &&
                      std::abs(report.margin_complement - base_report->margin_complement) < bound;
    }

    const auto y = center_columns(moved);
    row.cka_linear = linear_cka_value(x.data(), y.data());
    if (!cfg.rbf_fractions.empty()) {
      const Matrix y_sq = pairwise_sq_distances(y.data());
      const double median = cfg.rbf_bandwidth == RbfBandwidth::Reference
                                ? 0.0
                                : ckasens::detail::bandwidth_from_sq_distances(y_sq, 1.0);
      for (std::size_t k = 0; k < cfg.rbf_fractions.size(); ++k) {
        const double sigma = cfg.rbf_bandwidth == RbfBandwidth::Reference
                                 ? x_kernels[k].sigma
                                 : cfg.rbf_fractions[k] * median;
        row.cka_rbf.push_back(detail::aligned(x_kernels[k], detail::centered_rbf(y_sq, sigma)));
      }
    }
    row.predicted_limit = result.limit.predicted_cka_limit;
    result.rows.push_back(std::move(row));
  }
  return result;
}

/// Sweep where only row `index` moves. The predicted limit comes from the
/// singleton-subset formula, which equals the moved-singleton one.
inline SweepResult run_outlier_sweep(const RepresentationMatrix& x_in, Eigen::Index index,
                                     SweepConfig cfg) {
  const auto x = center_columns(x_in);
  if (index < 0 || index >= x.rows()) {
    throw Error(ErrorCode::InvalidSubset, "row index " + std::to_string(index) + " out of range");
  }
  cfg.subset = SubsetMask::all_but(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(index));
  cfg.limit_override = predict_limit_outlier(x, index);
  return run_sweep(x, cfg);
}

inline std::string fraction_label(double f) {
  std::ostringstream out;
  out << f;
  return out.str();
}

inline std::string format_sweep_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "distance,cka_linear";
  for (double f : r.rbf_fractions) out << ",cka_rbf_f" << fraction_label(f);
  out << ",predicted_limit,margin_ok\n";
  out << std::setprecision(12);
  for (const auto& row : r.rows) {
    out << row.distance << ',' << row.cka_linear;
    for (double v : row.cka_rbf) out << ',' << v;
    out << ',' << row.predicted_limit << ',';
    if (row.margin_ok) {
      out << (*row.margin_ok ? "true" : "false");
    } else {
      out << "NA";
    }
    out << '\n';
  }
  return out.str();
}

inline std::string format_limit_csv(const LimitPrediction& p) {
  std::ostringstream out;
  out << "rho,gamma,mean_s_sq_norm,mean_sq_norm,pr,predicted_limit\n" << std::setprecision(15)
      << p.rho << ',' << p.gamma << ',' << p.mean_s_sq_norm << ',' << p.mean_sq_norm << ',' << p.pr
      << ',' << p.predicted_cka_limit << '\n';
  return out.str();
}

struct InvMapRow {
  double mu = 0.0;
  double sigma = 0.0;
  double mean_cka = 0.0;
  double std_cka = 0.0;
  int repeats = 0;
};

/// Linear CKA between X and X M for random invertible Gaussian M, averaged
/// over `repeats` draws per (mu, sigma). The pair (0, 0) is skipped.
inline std::vector<InvMapRow> run_invmap(const RepresentationMatrix& x_in, const std::vector<double>& mus,
                                         const std::vector<double>& sigmas, int repeats,
                                         std::uint64_t seed) {
  if (repeats < 1) throw Error(ErrorCode::InvalidMatrix, "repeats must be >= 1");
  const auto x = center_columns(x_in);
  std::vector<InvMapRow> rows;
  const SeededRng base(seed, 2);
  for (std::size_t a = 0; a < mus.size(); ++a) {
    for (std::size_t b = 0; b < sigmas.size(); ++b) {
      if (mus[a] == 0.0 && sigmas[b] == 0.0) continue;
      std::vector<double> values;
      for (int r = 0; r < repeats; ++r) {
        auto rng = base.derive((a * sigmas.size() + b) * 1000003ULL + static_cast<std::uint64_t>(r));
        const auto draw = random_invertible_gaussian(x.cols(), mus[a], sigmas[b], rng);
        const auto y = apply_linear(x, draw.matrix);
        values.push_back(linear_cka_value(x.data(), y.data()));
      }
      InvMapRow row{mus[a], sigmas[b], 0.0, 0.0, repeats};
      for (double v : values) row.mean_cka += v;
      row.mean_cka /= repeats;
      if (repeats > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean_cka) * (v - row.mean_cka);
        row.std_cka = std::sqrt(ss / (repeats - 1));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string format_invmap_csv(const std::vector<InvMapRow>& rows) {
  std::ostringstream out;
  out << "mu,sigma,mean_cka,std_cka\n" << std::setprecision(12);
  for (const auto& r : rows) out << r.mu << ',' << r.sigma << ',' << r.mean_cka << ',' << r.std_cka << '\n';
  return out.str();
}

/// 64-bit FNV-1a over the exact input bytes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

}  // namespace ckasens::harness
