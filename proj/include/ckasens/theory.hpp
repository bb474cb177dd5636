#pragma once

// Closed-form limit of linear CKA under subset translation. For centered X,
// a subset S with rho = |S|/n and any unit v,
//
//   lim_{c->inf} CKA_lin(X, X_{S,v,c})
//       = Gamma(rho) * ||E_S[x]||^2 / E_X[||x||^2] * sqrt(PR(X)),
//
// with Gamma(rho) = rho / (1 - rho) and PR the participation ratio of the
// covariance spectrum. The expression is unchanged when S is replaced by its
// complement.

#include "ckasens/core.hpp"

namespace ckasens {

struct LimitPrediction {
  double rho = 0.0;
  double gamma = 0.0;
  double mean_s_sq_norm = 0.0;  // ||mean of S rows||^2
  double mean_sq_norm = 0.0;    // mean squared row norm of X
  double pr = 0.0;              // participation ratio of X's covariance
  double predicted_cka_limit = 0.0;
};

inline double gamma(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho must lie in (0, 1), got " + std::to_string(rho));
  }
  return rho / (1.0 - rho);
}

/// (sum l)^2 / sum l^2 over the (already clamped) eigenvalues.
inline double participation_ratio(const SpectrumSummary& spectrum) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double l : spectrum.eigenvalues) {
    const double v = std::max(l, 0.0);
    sum += v;
    sum_sq += v * v;
  }
  if (!(sum_sq > 0.0)) throw Error(ErrorCode::DegenerateData, "spectrum is all zero");
  return sum * sum / sum_sq;
}

inline LimitPrediction predict_limit(const RepresentationMatrix& x, const SubsetMask& subset) {
  if (!x.centered()) {
    throw Error(ErrorCode::NotCentered, "predict_limit requires column-centered X");
  }
  const auto n = x.rows();
  if (subset.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::InvalidSubset, "mask length " + std::to_string(subset.size()) +
                                              " does not match " + std::to_string(n) + " rows");
  }
  const auto members = subset.count();
  if (members == 0 || members == subset.size()) {
    throw Error(ErrorCode::InvalidSubset, "subset must be neither empty nor all rows");
  }

  Vector subset_sum = Vector::Zero(x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (subset[static_cast<std::size_t>(i)]) subset_sum += x.data().row(i).transpose();
  }
  const Vector subset_mean = subset_sum / static_cast<double>(members);

  LimitPrediction out;
  out.rho = static_cast<double>(members) / static_cast<double>(n);
  out.gamma = gamma(out.rho);
  out.mean_s_sq_norm = subset_mean.squaredNorm();
  out.mean_sq_norm = x.mean_sq_norm();
  if (!(out.mean_sq_norm > 0.0)) throw Error(ErrorCode::DegenerateData, "X is identically zero");
  out.pr = participation_ratio(covariance_spectrum(x));
  out.predicted_cka_limit = out.gamma * out.mean_s_sq_norm / out.mean_sq_norm * std::sqrt(out.pr);
  return out;
}

/// S = {x_index}, so rho = 1/n. By complement symmetry this is also the limit
/// when only that one row is translated.
inline LimitPrediction predict_limit_outlier(const RepresentationMatrix& x, Eigen::Index index) {
  if (x.rows() < 3) throw Error(ErrorCode::InvalidSubset, "outlier prediction needs n >= 3");
  if (index < 0 || index >= x.rows()) {
    throw Error(ErrorCode::InvalidSubset, "row index " + std::to_string(index) + " out of range");
  }
  SubsetMask singleton(static_cast<std::size_t>(x.rows()), false);
  singleton.set(static_cast<std::size_t>(index), true);
  return predict_limit(x, singleton);
}

}  // namespace ckasens
