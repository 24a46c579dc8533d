#pragma once

#include "mfk/grid.hpp"
#include "mfk/kernel.hpp"

#include <Eigen/Core>

#include <map>
#include <mutex>
#include <utility>

namespace mfk {

/// FFT machinery on the periodized box: the node set of a SpatialGrid with
/// period n * h per axis.
class SpectralGrid {
 public:
  explicit SpectralGrid(SpatialGrid space);

  const SpatialGrid& space() const { return space_; }
  Eigen::Index size() const { return space_.size(); }
  /// d x size() wavenumbers, flat order matching the spatial grid.
  const Eigen::MatrixXd& wavenumbers() const { return wavenumbers_; }
  /// Symbol of d/dx_axis (i k), zero at the Nyquist mode.
  const Eigen::VectorXcd& derivative_symbol(int axis) const { return derivative_[axis]; }
  double max_wavenumber() const { return max_wavenumber_; }

  Eigen::VectorXcd forward(const Eigen::Ref<const Eigen::VectorXd>& values) const;
  Eigen::VectorXd inverse(const Eigen::Ref<const Eigen::VectorXcd>& spectrum) const;

 private:
  void transform(Eigen::VectorXcd& data, bool inverse) const;

  SpatialGrid space_;
  Eigen::MatrixXd wavenumbers_;
  std::vector<Eigen::VectorXcd> derivative_;
  double max_wavenumber_ = 0.0;
};

/// Fourier symbols of the kernel: applying int p(s, x0, t, .) f(x0) dx0 to a
/// grid function multiplies its spectrum by exp(-i k.m - k' Sigma k / 2), and
/// the x0-gradient kernel adds a factor -i k_j.
class TransitionSymbols {
 public:
  TransitionSymbols(const Kernel& kernel, const SpectralGrid& grid);

  /// Symbol of the transition s -> t (s <= t; identity at s == t).
  Eigen::VectorXcd propagator(double s, double t) const;

  /// int_{t0}^{t1} S(s, t) l(s) ds for the two linear hat weights
  /// l_left = (t1 - s)/(t1 - t0), l_right = (s - t0)/(t1 - t0), t >= t1.
  /// Integrated in w = sqrt(t - s), which resolves the s -> t layer.
  struct IntervalWeights {
    Eigen::VectorXcd left;
    Eigen::VectorXcd right;
  };
  IntervalWeights interval(double t0, double t1, double t) const;

  bool time_homogeneous() const { return kernel_.time_homogeneous(); }

 private:
  Eigen::ArrayXcd exponent(double s, double t) const;

  Kernel kernel_;
  const SpectralGrid* grid_;
  Eigen::ArrayXcd rate_;  // i k.b0 + k'ak/2 for homogeneous kernels
  double max_rate_ = 0.0;
};

}  // namespace mfk
