#pragma once

#include "mfk/grid.hpp"

#include <Eigen/Core>

#include <cmath>
#include <utility>
#include <vector>

namespace mfk {

/// Real-valued function sampled on a spatial grid at a list of time levels.
///
/// Row k of `values` holds the flattened spatial slice at `times[k]`; the
/// function is implicitly zero outside the box.
template <typename Scalar>
class BasicField {
 public:
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Slice = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicField() = default;
  BasicField(SpatialGrid space, std::vector<double> times)
      : space_(std::move(space)),
        times_(std::move(times)),
        values_(Values::Zero(static_cast<Eigen::Index>(times_.size()), space_.size())),
        weights_(space_.trapezoid_weights().template cast<Scalar>()) {}

  const SpatialGrid& space() const { return space_; }
  const std::vector<double>& times() const { return times_; }
  int levels() const { return static_cast<int>(times_.size()); }

  Values& values() { return values_; }
  const Values& values() const { return values_; }

  auto level(int k) { return values_.row(k).transpose(); }
  auto level(int k) const { return values_.row(k).transpose(); }

  /// Spatial L1 norm of slice k (trapezoid).
  Scalar l1_norm(int k) const { return weights().dot(level(k).cwiseAbs()); }
  Scalar sup_norm(int k) const { return level(k).cwiseAbs().maxCoeff(); }
  /// Spatial integral of slice k (trapezoid).
  Scalar mass(int k) const { return weights().dot(level(k)); }

  /// Space-time L1 norm: time trapezoid of the per-level spatial L1 norms.
  Scalar global_l1() const {
    Scalar total = 0;
    for (int k = 0; k + 1 < levels(); ++k)
      total += Scalar(0.5) * (times_[k + 1] - times_[k]) * (l1_norm(k) + l1_norm(k + 1));
    return total;
  }

  bool all_finite() const { return values_.allFinite(); }

  /// Index of the level whose time equals t (within 1e-9), or -1.
  int level_at(double t) const {
    for (int k = 0; k < levels(); ++k)
      if (std::abs(times_[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return k;
    return -1;
  }

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights() const { return weights_; }

 private:
  SpatialGrid space_;
  std::vector<double> times_;
  Values values_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights_;
};

using Field = BasicField<double>;

/// Level times 0, dt, ..., T of a grid.
inline std::vector<double> level_times(const GridSpec& grid) {
  std::vector<double> t(grid.levels());
  for (int k = 0; k < grid.levels(); ++k) t[k] = grid.time(k);
  return t;
}

/// Space-time L1 distance between two fields on identical grids.
template <typename Scalar>
Scalar global_l1_distance(const BasicField<Scalar>& a, const BasicField<Scalar>& b) {
  BasicField<Scalar> diff(a.space(), a.times());
  diff.values() = a.values() - b.values();
  return diff.global_l1();
}

}  // namespace mfk
