#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mfk {

/// Raised for malformed grids, configurations, or violated preconditions
/// that the caller can fix by changing inputs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform tensor-product node set on the box [-R, R]^d.
///
/// Nodes include both faces of the box. Flat node indices run with axis 0
/// fastest. Values outside the box are taken to be zero by every consumer.
struct SpatialGrid {
  int dimension = 1;
  double radius = 8.0;
  int nodes_per_axis = 512;

  double spacing() const { return 2.0 * radius / (nodes_per_axis - 1); }
  double coordinate(int i) const { return -radius + i * spacing(); }

  Eigen::Index size() const;
  /// Coordinates of node `flat` written into `out` (length d).
  void node(Eigen::Index flat, Eigen::Ref<Eigen::VectorXd> out) const;
  /// d x size() matrix of node coordinates.
  Eigen::MatrixXd nodes() const;
  /// Tensor-product trapezoid weights; sum(w .* f) approximates the box integral.
  Eigen::VectorXd trapezoid_weights() const;
  /// Nearest node, or -1 when x lies outside the box.
  Eigen::Index nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  void validate() const;

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;
};

/// Space-time grid for the mild solver, plus the slab decomposition of [0, T].
///
/// `time_steps` uniform steps give `time_steps + 1` levels. A slab width of
/// zero means "choose from the contraction bound".
struct GridSpec {
  SpatialGrid space;
  double horizon = 1.0;
  int time_steps = 64;
  double slab_width = 0.0;

  int levels() const { return time_steps + 1; }
  double time_step() const { return horizon / time_steps; }
  double time(int level) const { return level * time_step(); }

  /// Number of time steps per slab; throws ConfigError unless the slab width
  /// is a whole number of steps and divides the horizon.
  int steps_per_slab() const;
  int slab_count() const { return time_steps / steps_per_slab(); }

  void validate() const;
};

}  // namespace mfk
