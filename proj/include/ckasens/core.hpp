#pragma once

// Dense-matrix primitives shared by every other header: representation
// matrices with a centering flag, Gram matrices, covariance spectra and a
// seeded random stream.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ckasens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  InvalidMatrix,
  NotCentered,
  ShapeMismatch,
  DegenerateData,
  InvalidBandwidth,
  TooFewSamples,
  InvalidRho,
  InvalidSubset,
  NoOrthogonalDirection,
  InvertibilityFailure,
  Stalled,
  Parse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::NotCentered: return "NotCentered";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::InvalidSubset: return "InvalidSubset";
    case ErrorCode::NoOrthogonalDirection: return "NoOrthogonalDirection";
    case ErrorCode::InvertibilityFailure: return "InvertibilityFailure";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Boolean row selector. `true` marks membership in the subset S.
class SubsetMask {
 public:
  SubsetMask() = default;
  explicit SubsetMask(std::vector<bool> bits) : bits_(std::move(bits)) {}
  SubsetMask(std::size_t n, bool value) : bits_(n, value) {}

  static SubsetMask first_k(std::size_t n, std::size_t k) {
    SubsetMask m(n, false);
    for (std::size_t i = 0; i < k && i < n; ++i) m.bits_[i] = true;
    return m;
  }

  static SubsetMask all_but(std::size_t n, std::size_t index) {
    SubsetMask m(n, true);
    if (index < n) m.bits_[index] = false;
    return m;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool value) { bits_[i] = value; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
  }

  /// Neither empty nor full.
  bool proper() const {
    const auto k = count();
    return k > 0 && k < bits_.size();
  }

  SubsetMask complement() const {
    SubsetMask m(*this);
    m.bits_.flip();
    return m;
  }

  const std::vector<bool>& bits() const noexcept { return bits_; }

  friend bool operator==(const SubsetMask&, const SubsetMask&) = default;

 private:
  std::vector<bool> bits_;
};

/// n examples (rows) by p features (columns), plus whether the columns have
/// been mean-centered.
class RepresentationMatrix {
 public:
  explicit RepresentationMatrix(Matrix data) : data_(std::move(data)) {
    validate();
  }

  /// Wraps `data` and asserts its centering state. A claimed centered matrix
  /// must have column means within 1e-10 of zero, relative to the entry scale.
  static RepresentationMatrix with_centered_flag(Matrix data, bool centered) {
    RepresentationMatrix r(std::move(data));
    if (centered) {
      const double scale = std::max(1.0, r.data_.cwiseAbs().maxCoeff());
      const double worst = r.data_.colwise().mean().cwiseAbs().maxCoeff();
      if (worst > 1e-10 * scale) {
        throw Error(ErrorCode::NotCentered, "column means are not zero");
      }
    }
    r.centered_ = centered;
    return r;
  }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index cols() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  bool centered() const noexcept { return centered_; }

  /// Mean squared row norm, E_x[||x||^2].
  double mean_sq_norm() const { return data_.squaredNorm() / static_cast<double>(rows()); }

  /// Square root of mean_sq_norm(); the scale unit for translation distances.
  double rms_norm() const { return std::sqrt(mean_sq_norm()); }

 private:
  friend RepresentationMatrix center_columns(const RepresentationMatrix&);

  void validate() const {
    if (data_.rows() < 2 || data_.cols() < 1) {
      throw Error(ErrorCode::InvalidMatrix, "need at least 2 rows and 1 column, got " +
                                                std::to_string(data_.rows()) + "x" +
                                                std::to_string(data_.cols()));
    }
    if (!data_.allFinite()) {
      throw Error(ErrorCode::InvalidMatrix, "non-finite entry");
    }
  }

  Matrix data_;
  bool centered_ = false;
};

inline RepresentationMatrix center_columns(const RepresentationMatrix& x) {
  RepresentationMatrix out(x);
  if (!x.centered()) {
    const Eigen::RowVectorXd means = x.data_.colwise().mean();
    out.data_.rowwise() -= means;
    out.centered_ = true;
  }
  return out;
}

/// Linear kernel K = X X^T.
inline Matrix gram(const RepresentationMatrix& x) {
  Matrix k(x.rows(), x.rows());
  k.setZero();
  k.selfadjointView<Eigen::Lower>().rankUpdate(x.data());
  return k.selfadjointView<Eigen::Lower>();
}

struct SpectrumSummary {
  std::vector<double> eigenvalues;  // nonincreasing, min(n, p) entries
  double total_variance = 0.0;
};

/// Eigenvalues of the biased covariance (1/n) X^T X, computed on whichever of
/// the p x p covariance or the n x n Gram is smaller. Values below 1e-12 times
/// the largest are clamped to zero.
inline SpectrumSummary covariance_spectrum(const RepresentationMatrix& x) {
  if (!x.centered()) {
    throw Error(ErrorCode::NotCentered, "covariance_spectrum requires centered input");
  }
  const auto n = x.rows();
  const auto p = x.cols();
  const auto inv_n = 1.0 / static_cast<double>(n);
  Matrix small = p <= n ? Matrix(x.data().transpose() * x.data() * inv_n)
                        : Matrix(x.data() * x.data().transpose() * inv_n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(small, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateData, "eigensolver did not converge");
  }
  const Vector& ev = solver.eigenvalues();  // ascending
  const auto keep = static_cast<std::size_t>(std::min(n, p));

  SpectrumSummary out;
  out.eigenvalues.reserve(keep);
  for (Eigen::Index i = ev.size() - 1; i >= 0 && out.eigenvalues.size() < keep; --i) {
    out.eigenvalues.push_back(ev[i]);
  }
  out.eigenvalues.resize(keep, 0.0);

  const double largest = std::max(0.0, out.eigenvalues.front());
  for (auto& l : out.eigenvalues) {
    if (l < 1e-12 * largest) l = 0.0;
  }
  for (double l : out.eigenvalues) out.total_variance += l;
  return out;
}

/// Deterministic random stream keyed by (seed, stream). Two generators with
/// the same key produce the same sequence; tasks derive their own streams
/// instead of sharing one.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Independent generator for a sub-task, e.g. one grid point of a sweep.
  SeededRng derive(std::uint64_t sub_stream) const {
    return SeededRng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + sub_stream + 1);
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 64>(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Uniform direction on the unit sphere in R^p (normalized Gaussian draw).
inline Vector sample_unit_direction(SeededRng& rng, Eigen::Index p) {
  if (p < 1) throw Error(ErrorCode::InvalidMatrix, "direction dimension must be >= 1");
  Vector v(p);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (Eigen::Index i = 0; i < p; ++i) v[i] = rng.normal();
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace ckasens
