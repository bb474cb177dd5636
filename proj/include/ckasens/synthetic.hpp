#pragma once

// Synthetic representation sets: two linearly separable unit cubes and
// centered Gaussian clouds.

#include "ckasens/core.hpp"
#include "ckasens/transforms.hpp"

namespace ckasens {

struct TwoCubeConfig {
  Eigen::Index points_per_cube = 2000;
  Eigen::Index dims = 100;
  double offset = 1.1;  // shift of the second cube along the first axis
  std::uint64_t seed = 0;
};

struct TwoCubeData {
  RepresentationMatrix x;  // centered; rows [0, points_per_cube) are cube 1
  SubsetMask cube1;        // S = cube 1
  Hyperplane separator;    // normal e_1, offset moved with the centering shift
  bool overlap_warning = false;  // offset <= 1: separability not guaranteed
};

/// Cube 1 is uniform on [-0.5, 0.5]^p, cube 2 the same cube shifted by
/// `offset` along e_1. The result is column-centered and the separating
/// hyperplane <e_1, x> = offset/2 is shifted by the same amount.
inline TwoCubeData two_cubes(const TwoCubeConfig& cfg, std::uint64_t stream = 0) {
  if (cfg.points_per_cube < 2 || cfg.dims < 1) {
    throw Error(ErrorCode::InvalidMatrix, "need points_per_cube >= 2 and dims >= 1");
  }
  SeededRng rng(cfg.seed, stream);
  const auto m = cfg.points_per_cube;
  Matrix raw(2 * m, cfg.dims);
  for (Eigen::Index i = 0; i < 2 * m; ++i) {
    for (Eigen::Index j = 0; j < cfg.dims; ++j) raw(i, j) = rng.uniform(-0.5, 0.5);
    if (i >= m) raw(i, 0) += cfg.offset;
  }
  const double axis_mean = raw.col(0).mean();

  TwoCubeData out{center_columns(RepresentationMatrix(std::move(raw))),
                  SubsetMask::first_k(static_cast<std::size_t>(2 * m), static_cast<std::size_t>(m)),
                  Hyperplane{Vector::Unit(cfg.dims, 0), 0.5 * cfg.offset - axis_mean},
                  cfg.offset <= 1.0};
  return out;
}

/// i.i.d. standard normal entries, column-centered.
inline RepresentationMatrix gaussian_cloud(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                           std::uint64_t stream = 0) {
  if (n < 2 || p < 1) throw Error(ErrorCode::InvalidMatrix, "need n >= 2 and p >= 1");
  SeededRng rng(seed, stream);
  Matrix raw(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) raw(i, j) = rng.normal();
  }
  return center_columns(RepresentationMatrix(std::move(raw)));
}

}  // namespace ckasens
