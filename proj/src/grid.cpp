#include "mfk/grid.hpp"

#include <cmath>
#include <sstream>

namespace mfk {

Eigen::Index SpatialGrid::size() const {
  Eigen::Index n = 1;
  for (int a = 0; a < dimension; ++a) n *= nodes_per_axis;
  return n;
}

void SpatialGrid::node(Eigen::Index flat, Eigen::Ref<Eigen::VectorXd> out) const {
  for (int a = 0; a < dimension; ++a) {
    out[a] = coordinate(static_cast<int>(flat % nodes_per_axis));
    flat /= nodes_per_axis;
  }
}

Eigen::MatrixXd SpatialGrid::nodes() const {
  Eigen::MatrixXd x(dimension, size());
  for (Eigen::Index j = 0; j < size(); ++j) node(j, x.col(j));
  return x;
}

Eigen::VectorXd SpatialGrid::trapezoid_weights() const {
  const double h = spacing();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(size(), std::pow(h, dimension));
  for (Eigen::Index j = 0; j < size(); ++j) {
    Eigen::Index flat = j;
    for (int a = 0; a < dimension; ++a) {
      const auto i = flat % nodes_per_axis;
      if (i == 0 || i == nodes_per_axis - 1) w[j] *= 0.5;
      flat /= nodes_per_axis;
    }
  }
  return w;
}

Eigen::Index SpatialGrid::nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double h = spacing();
  Eigen::Index flat = 0;
  Eigen::Index stride = 1;
  for (int a = 0; a < dimension; ++a) {
    const double u = (x[a] + radius) / h;
    if (!(u > -0.5 && u < nodes_per_axis - 0.5)) return -1;
    flat += static_cast<Eigen::Index>(std::lround(u)) * stride;
    stride *= nodes_per_axis;
  }
  return flat;
}

void SpatialGrid::validate() const {
  if (dimension < 1) throw ConfigError("grid: dimension must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("grid: radius must be positive");
  if (nodes_per_axis < 2) throw ConfigError("grid: need at least 2 nodes per axis (n_x >= 2)");
}

int GridSpec::steps_per_slab() const {
  if (slab_width <= 0.0) return time_steps;
  const double ratio = slab_width / time_step();
  const long steps = std::lround(ratio);
  if (steps < 1 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "grid: slab width tau=" << slab_width << " is not a whole number of time steps (dt="
        << time_step() << ")";
    throw ConfigError(msg.str());
  }
  if (time_steps % steps != 0) {
    std::ostringstream msg;
    msg << "grid: slab width tau=" << slab_width << " does not divide the horizon T=" << horizon
        << " (N*tau = T required)";
    throw ConfigError(msg.str());
  }
  return static_cast<int>(steps);
}

void GridSpec::validate() const {
  space.validate();
  if (!(horizon > 0.0)) throw ConfigError("grid: horizon T must be positive");
  if (time_steps < 1) throw ConfigError("grid: need at least one time step");
  if (slab_width < 0.0) throw ConfigError("grid: slab width tau must be positive");
  steps_per_slab();
}

}  // namespace mfk
