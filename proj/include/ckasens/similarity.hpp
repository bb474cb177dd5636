#pragma once

// Kernels and the HSIC / CKA estimators: biased HSIC with O(n^2) double
// centering, linear and RBF CKA, the unbiased HSIC_1 U-statistic, and the
// minibatch CKA that averages HSIC_1 over disjoint batches.

#include "ckasens/core.hpp"

#include <numeric>
#include <span>
#include <sstream>

namespace ckasens {

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double median_fraction = 0.0;  // RBF only: sigma = fraction * median pairwise distance

  static KernelSpec linear() { return {KernelKind::Linear, 0.0}; }
  static KernelSpec rbf(double fraction) {
    if (!(fraction > 0.0) || !std::isfinite(fraction)) {
      throw Error(ErrorCode::InvalidBandwidth, "median fraction must be positive");
    }
    return {KernelKind::Rbf, fraction};
  }

  std::string label() const {
    if (kind == KernelKind::Linear) return "linear";
    std::ostringstream out;
    out << "rbf_f" << median_fraction;
    return out.str();
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

struct KernelMatrix {
  Matrix values;
  KernelSpec source;
  double bandwidth = 0.0;  // sigma used for RBF, 0 for linear

  Eigen::Index size() const noexcept { return values.rows(); }
};

enum class Estimator { BiasedFull, UnbiasedMinibatch };

struct CkaResult {
  double value = 0.0;
  Estimator estimator = Estimator::BiasedFull;
  KernelSpec kernel;
};

/// Where minibatch RBF bandwidths come from.
enum class BandwidthScope { PerBatch, Global };

namespace detail {

inline void require_same_rows(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch,
                "row counts differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

inline void require_square_pair(const Matrix& k, const Matrix& l) {
  if (k.rows() != k.cols() || l.rows() != l.cols() || k.rows() != l.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "kernel matrices must be square and equal size");
  }
}

/// Fixed-order pairwise (tree) summation.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() == 1) return xs[0];
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace detail

/// Squared Euclidean distances between all rows, via the Gram identity on
/// re-centered rows (distances are translation invariant). Clamped at 0 and
/// with an exact zero diagonal.
inline Matrix pairwise_sq_distances(const Matrix& x) {
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Vector norms = xc.rowwise().squaredNorm();
  Matrix d = -2.0 * xc * xc.transpose();
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    d.col(j).array() = (d.col(j).array() + norms.array() + norms[j]).max(0.0);
    d(j, j) = 0.0;
  }
  // Symmetrize so (i, j) and (j, i) are bit-identical.
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < d.rows(); ++i) d(j, i) = d(i, j);
  }
  return d;
}

/// Median of the n(n-1)/2 off-diagonal entries of a squared-distance matrix,
/// returned as a distance (even counts average the two middle distances).
inline double median_pairwise_distance(const Matrix& sq_distances) {
  const auto n = sq_distances.rows();
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) sq.push_back(sq_distances(i, j));
  }
  if (sq.empty()) throw Error(ErrorCode::DegenerateData, "need at least two rows");
  const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  double median = std::sqrt(*mid);
  if (sq.size() % 2 == 0) {
    median = 0.5 * (median + std::sqrt(*std::max_element(sq.begin(), mid)));
  }
  return median;
}

namespace detail {

inline double bandwidth_from_sq_distances(const Matrix& sq_distances, double fraction) {
  if (!(sq_distances.maxCoeff() > 0.0)) {
    throw Error(ErrorCode::DegenerateData, "all rows are identical");
  }
  return fraction * median_pairwise_distance(sq_distances);
}

inline Matrix rbf_from_sq_distances(const Matrix& sq_distances, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::InvalidBandwidth, "sigma must be positive, got " + std::to_string(sigma));
  }
  const double scale = -0.5 / (sigma * sigma);
  Matrix k(sq_distances.rows(), sq_distances.cols());
  k.array() = (sq_distances.array() * scale).exp();
  k.diagonal().setOnes();
  return k;
}

}  // namespace detail

/// sigma = fraction * median pairwise Euclidean distance.
inline double rbf_bandwidth(const RepresentationMatrix& x, double fraction) {
  if (!(fraction > 0.0)) throw Error(ErrorCode::InvalidBandwidth, "fraction must be positive");
  return detail::bandwidth_from_sq_distances(pairwise_sq_distances(x.data()), fraction);
}

/// RBF kernel with an explicit bandwidth.
inline KernelMatrix rbf_kernel(const RepresentationMatrix& x, double sigma, double fraction = 0.0) {
  KernelMatrix k;
  k.values = detail::rbf_from_sq_distances(pairwise_sq_distances(x.data()), sigma);
  k.source = {KernelKind::Rbf, fraction};
  k.bandwidth = sigma;
  return k;
}

/// Gram matrix for the linear kernel, median-heuristic RBF otherwise.
inline KernelMatrix kernel_matrix(const RepresentationMatrix& x, const KernelSpec& spec) {
  KernelMatrix k;
  k.source = spec;
  if (spec.kind == KernelKind::Linear) {
    k.values = gram(x);
    return k;
  }
  if (!(spec.median_fraction > 0.0)) {
    throw Error(ErrorCode::InvalidBandwidth, "median fraction must be positive");
  }
  const Matrix d = pairwise_sq_distances(x.data());
  k.bandwidth = detail::bandwidth_from_sq_distances(d, spec.median_fraction);
  k.values = detail::rbf_from_sq_distances(d, k.bandwidth);
  return k;
}

/// H K H, computed as K - row means - column means + grand mean.
inline void double_center_in_place(Matrix& k) {
  const Vector row_means = k.rowwise().mean();
  const Eigen::RowVectorXd col_means = k.colwise().mean();
  const double grand = row_means.mean();
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    k.col(j).array() -= row_means.array() + (col_means[j] - grand);
  }
}

inline Matrix double_center(Matrix k) {
  double_center_in_place(k);
  return k;
}

/// Biased HSIC, tr(K H L H) / (n-1)^2.
inline double hsic_biased(const Matrix& k, const Matrix& l) {
  detail::require_square_pair(k, l);
  const auto n = static_cast<double>(k.rows());
  if (k.rows() < 2) throw Error(ErrorCode::TooFewSamples, "HSIC needs n >= 2");
  return double_center(k).cwiseProduct(l).sum() / ((n - 1.0) * (n - 1.0));
}

inline double hsic_biased(const KernelMatrix& k, const KernelMatrix& l) {
  return hsic_biased(k.values, l.values);
}

/// Biased CKA from two kernel matrices; clamped to [0, 1].
inline double cka_from_kernels(const Matrix& k, const Matrix& l) {
  detail::require_square_pair(k, l);
  const Matrix kc = double_center(k);
  const Matrix lc = double_center(l);
  const double kl = kc.cwiseProduct(lc).sum();
  const double kk = kc.squaredNorm();
  const double ll = lc.squaredNorm();
  // Round-off floor for a centered kernel that should be exactly zero.
  const double eps = 1e-26;
  if (kk <= eps * k.squaredNorm() || ll <= eps * l.squaredNorm() || kk == 0.0 || ll == 0.0) {
    throw Error(ErrorCode::DegenerateData, "zero self-HSIC (constant representation)");
  }
  return std::clamp(kl / std::sqrt(kk * ll), 0.0, 1.0);
}

/// Linear CKA in feature space: ||X^T Y||_F^2 / (||X^T X||_F ||Y^T Y||_F) on
/// centered X, Y. Equal to the kernel form, O(n p q) instead of O(n^2).
inline double linear_cka_value(const Matrix& xc, const Matrix& yc) {
  detail::require_same_rows(xc.rows(), yc.rows());
  const double xy = (xc.transpose() * yc).squaredNorm();
  const double xx = (xc.transpose() * xc).norm();
  const double yy = (yc.transpose() * yc).norm();
  if (xx == 0.0 || yy == 0.0) {
    throw Error(ErrorCode::DegenerateData, "zero self-HSIC (constant representation)");
  }
  return std::clamp(xy / (xx * yy), 0.0, 1.0);
}

/// Biased CKA. Inputs are centered here if their flag is unset.
inline CkaResult cka(const RepresentationMatrix& x, const RepresentationMatrix& y,
                     const KernelSpec& spec) {
  detail::require_same_rows(x.rows(), y.rows());
  const auto xc = center_columns(x);
  const auto yc = center_columns(y);
  CkaResult r;
  r.kernel = spec;
  r.estimator = Estimator::BiasedFull;
  if (spec.kind == KernelKind::Linear) {
    r.value = linear_cka_value(xc.data(), yc.data());
  } else {
    r.value = cka_from_kernels(kernel_matrix(xc, spec).values, kernel_matrix(yc, spec).values);
  }
  return r;
}

/// Unbiased HSIC_1 U-statistic; requires n >= 4.
inline double hsic_unbiased(const Matrix& k, const Matrix& l) {
  detail::require_square_pair(k, l);
  const auto n_rows = k.rows();
  if (n_rows < 4) throw Error(ErrorCode::TooFewSamples, "HSIC_1 needs n >= 4");
  const auto n = static_cast<double>(n_rows);
  Matrix kt = k;
  Matrix lt = l;
  kt.diagonal().setZero();
  lt.diagonal().setZero();
  const double trace_kl = kt.cwiseProduct(lt).sum();
  const Vector k_row = kt.rowwise().sum();
  const Vector l_row = lt.rowwise().sum();
  const double sum_k = k_row.sum();
  const double sum_l = l_row.sum();
  const double cross = k_row.dot(l_row);  // 1^T K~ L~ 1 for symmetric K~
  return (trace_kl + sum_k * sum_l / ((n - 1.0) * (n - 2.0)) - 2.0 / (n - 2.0) * cross) /
         (n * (n - 3.0));
}

inline double hsic_unbiased(const KernelMatrix& k, const KernelMatrix& l) {
  return hsic_unbiased(k.values, l.values);
}

namespace detail {

/// Round-off floor for an unbiased self-HSIC: compared against the tr(K~K~)
/// term, which dominates for non-degenerate data.
inline bool degenerate_self_hsic(double value, const Matrix& k) {
  Matrix kt = k;
  kt.diagonal().setZero();
  const auto n = static_cast<double>(k.rows());
  const double scale = kt.squaredNorm() / (n * (n - 3.0));
  return !(value > 1e-12 * scale);
}

struct HsicTriple {
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;
};

inline HsicTriple unbiased_triple(const Matrix& k, const Matrix& l) {
  HsicTriple t{hsic_unbiased(k, l), hsic_unbiased(k, k), hsic_unbiased(l, l)};
  if (degenerate_self_hsic(t.xx, k) || degenerate_self_hsic(t.yy, l)) {
    throw Error(ErrorCode::DegenerateData, "zero or negative unbiased self-HSIC");
  }
  return t;
}

}  // namespace detail

/// CKA from the unbiased HSIC_1 on the full data (one batch). Not clamped.
inline CkaResult unbiased_cka(const RepresentationMatrix& x, const RepresentationMatrix& y,
                              const KernelSpec& spec) {
  detail::require_same_rows(x.rows(), y.rows());
  const auto xc = center_columns(x);
  const auto yc = center_columns(y);
  const auto t = detail::unbiased_triple(kernel_matrix(xc, spec).values, kernel_matrix(yc, spec).values);
  return {t.xy / (std::sqrt(t.xx) * std::sqrt(t.yy)), Estimator::UnbiasedMinibatch, spec};
}

/// Minibatch CKA: rows are shuffled once, split into floor(n / batch_size)
/// full batches (remainder dropped) and the per-batch HSIC_1 terms averaged.
/// With a single batch no shuffle is applied, so the result equals
/// unbiased_cka bit for bit.
inline CkaResult minibatch_cka(const RepresentationMatrix& x, const RepresentationMatrix& y,
                               const KernelSpec& spec, Eigen::Index batch_size, SeededRng& rng,
                               BandwidthScope scope = BandwidthScope::PerBatch) {
  detail::require_same_rows(x.rows(), y.rows());
  const auto n = x.rows();
  if (batch_size < 4) throw Error(ErrorCode::TooFewSamples, "batch_size must be >= 4");
  if (n < batch_size) throw Error(ErrorCode::TooFewSamples, "fewer rows than batch_size");

  const auto xc = center_columns(x);
  const auto yc = center_columns(y);
  const auto batches = n / batch_size;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (batches > 1) std::shuffle(order.begin(), order.end(), rng.engine());

  double sigma_x = 0.0;
  double sigma_y = 0.0;
  if (spec.kind == KernelKind::Rbf && scope == BandwidthScope::Global) {
    sigma_x = rbf_bandwidth(xc, spec.median_fraction);
    sigma_y = rbf_bandwidth(yc, spec.median_fraction);
  }

  auto batch_kernel = [&](const Matrix& rows, double global_sigma) {
    RepresentationMatrix r(rows);
    if (spec.kind == KernelKind::Rbf && scope == BandwidthScope::Global) {
      return rbf_kernel(r, global_sigma, spec.median_fraction).values;
    }
    return kernel_matrix(r, spec).values;
  };

  std::vector<double> xy(static_cast<std::size_t>(batches));
  std::vector<double> xx(xy.size());
  std::vector<double> yy(xy.size());
  Matrix xb(batch_size, xc.cols());
  Matrix yb(batch_size, yc.cols());
  for (Eigen::Index b = 0; b < batches; ++b) {
    for (Eigen::Index i = 0; i < batch_size; ++i) {
      const auto src = order[static_cast<std::size_t>(b * batch_size + i)];
      xb.row(i) = xc.data().row(src);
      yb.row(i) = yc.data().row(src);
    }
    const auto t = detail::unbiased_triple(batch_kernel(xb, sigma_x), batch_kernel(yb, sigma_y));
    const auto bi = static_cast<std::size_t>(b);
    xy[bi] = t.xy;
    xx[bi] = t.xx;
    yy[bi] = t.yy;
  }
  const double m = static_cast<double>(batches);
  const double num = detail::pairwise_sum(xy) / m;
  const double den = std::sqrt(detail::pairwise_sum(xx) / m) * std::sqrt(detail::pairwise_sum(yy) / m);
  return {num / den, Estimator::UnbiasedMinibatch, spec};
}

}  // namespace ckasens
