#pragma once

// Transformations of representation sets: subset translation, directions that
// keep a separating hyperplane's projections fixed, separation margins, and
// random invertible Gaussian linear maps.

#include "ckasens/core.hpp"

#include <Eigen/SVD>

namespace ckasens {

/// Rows with subset[i] == true form S and stay put; every other row moves by
/// distance * direction.
struct TranslationSpec {
  SubsetMask subset;
  Vector direction;
  double distance = 0.0;

  void validate(Eigen::Index rows, Eigen::Index cols) const {
    if (subset.size() != static_cast<std::size_t>(rows) || direction.size() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "translation spec does not match matrix shape");
    }
    if (!subset.proper()) {
      throw Error(ErrorCode::InvalidSubset, "subset must be neither empty nor all rows");
    }
    if (std::abs(direction.norm() - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidMatrix, "direction must have unit norm");
    }
    if (!std::isfinite(distance)) throw Error(ErrorCode::InvalidMatrix, "distance must be finite");
  }
};

/// {x : <normal, x> = offset}.
struct Hyperplane {
  Vector normal;
  double offset = 0.0;
};

struct SeparationReport {
  bool separated = false;
  double margin_s = 0.0;           // offset - max_{x in S} <w, x>
  double margin_complement = 0.0;  // min_{x not in S} <w, x> - offset
};

inline RepresentationMatrix subset_translate(const RepresentationMatrix& x,
                                             const TranslationSpec& spec) {
  spec.validate(x.rows(), x.cols());
  Matrix out = x.data();
  const Eigen::RowVectorXd shift = spec.distance * spec.direction.transpose();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!spec.subset[static_cast<std::size_t>(i)]) out.row(i) += shift;
  }
  return RepresentationMatrix(std::move(out));
}

/// Unit vector orthogonal to the hyperplane normal: a random direction with
/// its normal component removed, resampled if the remainder is tiny.
inline Vector margin_preserving_direction(const Hyperplane& h, SeededRng& rng) {
  const auto p = h.normal.size();
  if (p < 2) throw Error(ErrorCode::NoOrthogonalDirection, "no orthogonal direction in R^1");
  const double w_sq = h.normal.squaredNorm();
  if (!(w_sq > 0.0)) throw Error(ErrorCode::InvalidMatrix, "hyperplane normal is zero");
  for (;;) {
    Vector v = sample_unit_direction(rng, p);
    v -= (v.dot(h.normal) / w_sq) * h.normal;
    if (v.norm() < 1e-8) continue;
    v.normalize();
    // A second pass pushes the residual inner product down to round-off.
    v -= (v.dot(h.normal) / w_sq) * h.normal;
    return v.normalized();
  }
}

inline SeparationReport check_separation(const RepresentationMatrix& x, const Hyperplane& h,
                                         const SubsetMask& subset) {
  if (h.normal.size() != x.cols() || subset.size() != static_cast<std::size_t>(x.rows())) {
    throw Error(ErrorCode::ShapeMismatch, "hyperplane or mask does not match matrix shape");
  }
  const Vector proj = x.data() * h.normal;
  double max_s = -std::numeric_limits<double>::infinity();
  double min_c = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    if (subset[static_cast<std::size_t>(i)]) {
      max_s = std::max(max_s, proj[i]);
    } else {
      min_c = std::min(min_c, proj[i]);
    }
  }
  SeparationReport r;
  r.margin_s = h.offset - max_s;
  r.margin_complement = min_c - h.offset;
  r.separated = r.margin_s > 0.0 && r.margin_complement > 0.0;
  return r;
}

struct InvertibleDraw {
  Matrix matrix;
  double condition = 0.0;  // largest / smallest singular value
  int attempts = 0;
};

/// p x p matrix with i.i.d. N(mu, sigma^2) entries, redrawn until the ratio of
/// smallest to largest singular value exceeds 1e-10 (at most 50 draws).
inline InvertibleDraw random_invertible_gaussian(Eigen::Index p, double mu, double sigma,
                                                 SeededRng& rng) {
  if (p < 1) throw Error(ErrorCode::InvalidMatrix, "dimension must be >= 1");
  if (!(sigma >= 0.0) || (sigma == 0.0 && mu == 0.0)) {
    throw Error(ErrorCode::InvertibilityFailure, "need sigma >= 0 and not mu = sigma = 0");
  }
  constexpr int kMaxAttempts = 50;
  InvertibleDraw draw;
  draw.matrix.resize(p, p);
  for (draw.attempts = 1; draw.attempts <= kMaxAttempts; ++draw.attempts) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < p; ++i) draw.matrix(i, j) = mu + sigma * rng.normal();
    }
    Eigen::BDCSVD<Matrix> svd(draw.matrix);
    const Vector& s = svd.singularValues();
    const double largest = s[0];
    const double smallest = s[s.size() - 1];
    if (largest > 0.0 && smallest > 1e-10 * largest) {
      draw.condition = largest / smallest;
      return draw;
    }
  }
  throw Error(ErrorCode::InvertibilityFailure,
              "no invertible draw in 50 attempts (mu=" + std::to_string(mu) +
                  ", sigma=" + std::to_string(sigma) + ")");
}

/// Y = X M. Column means stay zero, so the centered flag carries over.
inline RepresentationMatrix apply_linear(const RepresentationMatrix& x, const Matrix& m) {
  if (m.rows() != x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "map has " + std::to_string(m.rows()) +
                                              " rows, matrix has " + std::to_string(x.cols()) +
                                              " columns");
  }
  Matrix y = x.data() * m;
  if (!x.centered()) return RepresentationMatrix(std::move(y));
  // Re-zero the round-off in the column means; the claim is exact in theory.
  y.rowwise() -= y.colwise().mean();
  return RepresentationMatrix::with_centered_flag(std::move(y), true);
}

}  // namespace ckasens
