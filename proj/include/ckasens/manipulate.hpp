#pragma once

// Pushing linear CKA toward a target value by translating a subset of rows,
// optionally restricted to directions orthogonal to a separating hyperplane so
// every row's projection on its normal (and therefore the classifier output)
// is unchanged. Also: the log-cosh CKA-map loss and the lambda balancing rule
// used when that loss is combined with distillation.

#include "ckasens/core.hpp"
#include "ckasens/similarity.hpp"
#include "ckasens/transforms.hpp"

#include <iomanip>
#include <optional>
#include <sstream>

namespace ckasens {

/// Symmetric L x L matrix of pairwise CKA values with unit diagonal.
class CkaMap {
 public:
  explicit CkaMap(Matrix values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols() || values_.rows() < 1) {
      throw Error(ErrorCode::ShapeMismatch, "CKA map must be square");
    }
    if (!values_.allFinite()) throw Error(ErrorCode::InvalidMatrix, "non-finite CKA map entry");
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (std::abs(values_(i, i) - 1.0) > 1e-10) {
        throw Error(ErrorCode::InvalidMatrix, "CKA map diagonal must be 1");
      }
      for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        const double v = values_(i, j);
        if (v < 0.0 || v > 1.0 + 1e-10 || std::abs(v - values_(j, i)) > 1e-10) {
          throw Error(ErrorCode::InvalidMatrix, "CKA map entries must be symmetric and in [0, 1]");
        }
      }
    }
  }

  /// Pairwise biased CKA between all representation sets.
  static CkaMap from_representations(const std::vector<RepresentationMatrix>& layers,
                                     const KernelSpec& spec) {
    const auto count = static_cast<Eigen::Index>(layers.size());
    Matrix m = Matrix::Identity(count, count);
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = i + 1; j < count; ++j) {
        m(i, j) = m(j, i) = cka(layers[static_cast<std::size_t>(i)],
                                layers[static_cast<std::size_t>(j)], spec).value;
      }
    }
    return CkaMap(std::move(m));
  }

  Eigen::Index size() const noexcept { return values_.rows(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

/// ln cosh(d), stable for large |d|.
inline double log_cosh(double d) {
  const double a = std::abs(d);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

/// Sum over all (i, j), diagonal included, of ln cosh(current - target).
inline double log_cosh_map_loss(const CkaMap& current, const CkaMap& target) {
  if (current.size() != target.size()) {
    throw Error(ErrorCode::ShapeMismatch, "CKA maps differ in size");
  }
  double total = 0.0;
  const Matrix& a = current.values();
  const Matrix& b = target.values();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) total += log_cosh(a(i, j) - b(i, j));
  }
  return total;
}

struct LambdaSchedulerState {
  double lambda = 500.0;
  double scaling_factor = 0.8;      // alpha in (0, 1)
  double accuracy_threshold = 1.0;  // eta >= 0, percentage points
  double original_accuracy = 0.0;   // acc_0 in [0, 100]

  void validate() const {
    if (!(lambda > 0.0) || !(scaling_factor > 0.0 && scaling_factor < 1.0) ||
        !(accuracy_threshold >= 0.0) || !(original_accuracy >= 0.0 && original_accuracy <= 100.0)) {
      throw Error(ErrorCode::InvalidMatrix, "invalid lambda scheduler state");
    }
  }
};

/// One balancing step: shrink lambda by alpha when accuracy dropped by more
/// than the threshold, grow it by 1/alpha otherwise.
inline LambdaSchedulerState lambda_step(LambdaSchedulerState state, double current_accuracy) {
  state.validate();
  if (!(current_accuracy >= 0.0 && current_accuracy <= 100.0)) {
    throw Error(ErrorCode::InvalidMatrix, "accuracy must lie in [0, 100]");
  }
  const double drop = state.original_accuracy - current_accuracy;
  if (drop > state.accuracy_threshold) {
    state.lambda *= state.scaling_factor;
  } else {
    state.lambda /= state.scaling_factor;
  }
  return state;
}

/// d CKA_lin(X, Y) / d Y, including the column centering of Y. Uses the
/// feature-space form CKA = ||X^T Y||^2 / (||X^T X|| ||Y^T Y||), so every
/// intermediate is at most n x max(p, q).
inline Matrix linear_cka_gradient(const RepresentationMatrix& x, const RepresentationMatrix& y) {
  if (x.rows() != y.rows()) throw Error(ErrorCode::ShapeMismatch, "row counts differ");
  const auto x_centered = center_columns(x);
  const Matrix& xc = x_centered.data();
  const Matrix yc = center_columns(y).data();
  const Matrix xty = xc.transpose() * yc;
  const Matrix yty = yc.transpose() * yc;
  const double num = xty.squaredNorm();
  const double den_x = (xc.transpose() * xc).norm();
  const double den_y = yty.norm();
  if (den_x == 0.0 || den_y == 0.0) {
    throw Error(ErrorCode::DegenerateData, "zero self-HSIC (constant representation)");
  }
  Matrix grad = (2.0 / (den_x * den_y)) * (xc * xty) -
                (2.0 * num / (den_x * den_y * den_y * den_y)) * (yc * yty);
  // Chain rule through centering: project out the column-mean component.
  grad.rowwise() -= grad.colwise().mean();
  return grad;
}

enum class TranslationConstraint { Unconstrained, OrthogonalToHyperplane };

struct ManipulationConfig {
  double target_cka = 0.0;
  TranslationConstraint constraint = TranslationConstraint::Unconstrained;
  std::optional<Hyperplane> hyperplane;  // required for OrthogonalToHyperplane
  double step_size = 1.0;  // initial step, in units of the RMS row norm of Y0
  Eigen::Index max_iters = 5000;
  double tolerance = 1e-3;
  // t = 0 is a stationary point when Y0 = X, so descent starts from a small
  // seeded translation of this length (RMS units).
  double initial_scale = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(target_cka >= 0.0 && target_cka <= 1.0)) {
      throw Error(ErrorCode::InvalidMatrix, "target CKA must lie in [0, 1]");
    }
    if (!(step_size > 0.0) || !(tolerance > 0.0) || max_iters < 0 || !(initial_scale >= 0.0)) {
      throw Error(ErrorCode::InvalidMatrix, "step size and tolerance must be positive");
    }
    if (constraint == TranslationConstraint::OrthogonalToHyperplane && !hyperplane) {
      throw Error(ErrorCode::InvalidMatrix, "orthogonal constraint needs a hyperplane");
    }
  }
};

struct TraceRow {
  Eigen::Index iter = 0;
  double cka = 0.0;
  double translation_norm = 0.0;
  double loss = 0.0;
};

enum class ManipulationStatus { Converged, MaxIterations, Stalled };

struct ManipulationResult {
  RepresentationMatrix y;
  Vector translation;
  std::vector<TraceRow> trace;
  ManipulationStatus status = ManipulationStatus::Converged;

  double final_cka() const { return trace.empty() ? 0.0 : trace.back().cka; }
};

/// Thrown when CKA stops moving before reaching the target. Carries the
/// partial run so callers can still write the trace.
class StalledError : public Error {
 public:
  explicit StalledError(ManipulationResult partial)
      : Error(ErrorCode::Stalled, "CKA stopped changing before reaching the target"),
        partial_(std::move(partial)) {}

  const ManipulationResult& partial() const noexcept { return partial_; }

 private:
  ManipulationResult partial_;
};

inline std::string format_trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << std::setprecision(12) << "iter,cka,translation_norm,loss\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << r.cka << ',' << r.translation_norm << ',' << r.loss << '\n';
  }
  return out.str();
}

/// Gradient descent on (CKA(X, Y0 + mask (x) t) - target)^2 over a single
/// translation t shared by the rows where `moved` is true. Under the
/// orthogonal constraint t is projected onto the hyperplane normal's
/// orthogonal complement after every step.
inline ManipulationResult manipulate_to_target(const RepresentationMatrix& x,
                                               const RepresentationMatrix& y0,
                                               const ManipulationConfig& cfg,
                                               const SubsetMask& moved) {
  cfg.validate();
  if (x.rows() != y0.rows()) throw Error(ErrorCode::ShapeMismatch, "X and Y0 row counts differ");
  if (moved.size() != static_cast<std::size_t>(y0.rows()) || !moved.proper()) {
    throw Error(ErrorCode::InvalidSubset, "mask must match rows and be neither empty nor full");
  }
  const auto p = y0.cols();
  const bool constrained = cfg.constraint == TranslationConstraint::OrthogonalToHyperplane;
  if (constrained && cfg.hyperplane->normal.size() != p) {
    throw Error(ErrorCode::ShapeMismatch, "hyperplane dimension differs from Y0");
  }

  auto project = [&](Vector& v) {
    if (!constrained) return;
    const Vector& w = cfg.hyperplane->normal;
    v -= (v.dot(w) / w.squaredNorm()) * w;
  };
  auto translated = [&](const Vector& t) {
    Matrix y = y0.data();
    const Eigen::RowVectorXd shift = t.transpose();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (moved[static_cast<std::size_t>(i)]) y.row(i) += shift;
    }
    return RepresentationMatrix(std::move(y));
  };
  auto evaluate = [&](const RepresentationMatrix& y) { return cka(x, y, KernelSpec::linear()).value; };

  const double scale = y0.rms_norm();
  const auto xc = center_columns(x);

  Vector t = Vector::Zero(p);
  RepresentationMatrix y = y0;
  double value = evaluate(y);
  std::vector<TraceRow> trace;
  auto record = [&](Eigen::Index iter) {
    const double gap = value - cfg.target_cka;
    trace.push_back({iter, value, t.norm(), gap * gap});
  };
  record(0);
  if (std::abs(value - cfg.target_cka) < cfg.tolerance) {
    return {std::move(y), std::move(t), std::move(trace), ManipulationStatus::Converged};
  }

  if (cfg.initial_scale > 0.0) {
    SeededRng rng(cfg.seed, 0x6d616e6970ULL);
    Vector start = constrained ? margin_preserving_direction(*cfg.hyperplane, rng)
                               : sample_unit_direction(rng, p);
    t = cfg.initial_scale * scale * start;
    y = translated(t);
    value = evaluate(y);
  }

  // Step length adapts: x1.5 after an accepted step, x0.5 and reject when the
  // loss would grow.
  double rate = cfg.step_size;
  Vector grad_t = Vector::Zero(p);
  bool stale = true;
  Eigen::Index flat_iters = 0;
  for (Eigen::Index iter = 1; iter <= cfg.max_iters; ++iter) {
    if (stale) {
      const Matrix grad_y = linear_cka_gradient(xc, y);
      grad_t.setZero();
      for (Eigen::Index i = 0; i < grad_y.rows(); ++i) {
        if (moved[static_cast<std::size_t>(i)]) grad_t += grad_y.row(i).transpose();
      }
    }
    // Descent in RMS units: t = scale * s, dL/ds = scale * dL/dt.
    Vector step = (2.0 * (value - cfg.target_cka) * scale * scale * rate) * grad_t;
    project(step);
    Vector candidate = t - step;
    project(candidate);
    auto y_candidate = translated(candidate);
    const double candidate_value = evaluate(y_candidate);

    const double previous = value;
    if (std::abs(candidate_value - cfg.target_cka) < std::abs(value - cfg.target_cka)) {
      t = std::move(candidate);
      y = std::move(y_candidate);
      value = candidate_value;
      rate *= 1.5;
      stale = true;
    } else {
      rate *= 0.5;
      stale = false;
    }
    record(iter);

    if (std::abs(value - cfg.target_cka) < cfg.tolerance) {
      return {std::move(y), std::move(t), std::move(trace), ManipulationStatus::Converged};
    }
    flat_iters = std::abs(value - previous) < 1e-12 ? flat_iters + 1 : 0;
    if (flat_iters >= 50) {
      throw StalledError({std::move(y), std::move(t), std::move(trace), ManipulationStatus::Stalled});
    }
  }
  return {std::move(y), std::move(t), std::move(trace), ManipulationStatus::MaxIterations};
}

}  // namespace ckasens
