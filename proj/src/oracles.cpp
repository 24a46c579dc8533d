#include "mfk/oracles.hpp"

#include "mfk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace mfk {

double heat_oracle(double mean, double variance, double nu, double t, double x) {
  const double v = variance + nu * t;
  return std::exp(-(x - mean) * (x - mean) / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
}

double exp_mass_oracle(double lambda, double t) { return std::exp(lambda * t); }

namespace {

const QuadratureRule& hermite(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_hermite_normal(n)).first;
  return it->second;
}

}  // namespace

double burgers_paper_formula(const InitialDensity& u0, double nu, double t, double x, int quad_nodes,
                             BurgersVariant variant, bool flip_nodes) {
  if (u0.dimension() != 1) throw std::invalid_argument("burgers_paper_formula: one-dimensional only");
  if (!(nu > 0.0)) throw std::invalid_argument("burgers_paper_formula: nu must be positive");
  if (t < 0.0) throw std::invalid_argument("burgers_paper_formula: t must be >= 0");
  Eigen::VectorXd point(1);
  if (t == 0.0) {
    point[0] = x;
    return u0.pdf(point);
  }
  const double sigma = variant == BurgersVariant::nu_scaled ? nu : std::sqrt(nu);
  const double kappa = variant == BurgersVariant::nu_scaled ? nu * nu : nu;
  const auto& rule = hermite(quad_nodes);
  const double scale = sigma * std::sqrt(t);
  const int n = static_cast<int>(rule.nodes.size());
  Eigen::VectorXd exponent(n), density(n);
  for (int i = 0; i < n; ++i) {
    const double z = flip_nodes ? -rule.nodes[i] : rule.nodes[i];
    point[0] = x + scale * z;
    exponent[i] = -u0.cdf(point[0]) / kappa;
    density[i] = u0.pdf(point);
  }
  const double shift = exponent.maxCoeff();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = rule.weights[i] * std::exp(exponent[i] - shift);
    num += e * density[i];
    den += e;
  }
  if (!(den > 0.0)) throw std::runtime_error("burgers_paper_formula: denominator underflow");
  return num / den;
}

Field burgers_fd_fine(const InitialDensity& u0, double nu, const GridSpec& grid, const FdOptions& options) {
  if (grid.space.dimension != 1 || u0.dimension() != 1)
    throw ConfigError("burgers_fd_reference: one-dimensional only");
  if (options.refinement < 4) throw ConfigError("burgers_fd_reference: refinement must be >= 4");
  if (!(nu > 0.0)) throw ConfigError("burgers_fd_reference: nu must be positive");
  grid.space.validate();
  const int f = options.refinement;
  const int cells = f * (grid.space.nodes_per_axis - 1) + 1;
  const double h = grid.space.spacing() / f;
  const double left = -grid.space.radius;

  Eigen::VectorXd u(cells);
  for (int m = 0; m < cells; ++m) {
    const double c = left + m * h;
    u[m] = (u0.cdf(c + 0.5 * h) - u0.cdf(c - 0.5 * h)) / h;
  }

  SpatialGrid fine_space{1, grid.space.radius, cells};
  Field out(fine_space, level_times(grid));
  out.level(0) = u;

  // Interface fluxes with zero flux through both outer faces.
  Eigen::VectorXd flux(cells + 1), stage(cells);
  auto rhs = [&](const Eigen::VectorXd& v, Eigen::VectorXd& du) {
    flux[0] = 0.0;
    flux[cells] = 0.0;
    for (int m = 0; m + 1 < cells; ++m)
      flux[m + 1] = 0.25 * (v[m] * v[m] + v[m + 1] * v[m + 1]) - 0.5 * nu * (v[m + 1] - v[m]) / h;
    for (int m = 0; m < cells; ++m) du[m] = -(flux[m + 1] - flux[m]) / h;
  };

  const double dt_max = options.cfl * h * h / nu;
  const double out_dt = grid.time_step();
  const int substeps = static_cast<int>(std::ceil(out_dt / dt_max - 1e-12));
  const double dt = out_dt / substeps;
  Eigen::VectorXd k1(cells), k2(cells);
  for (int level = 1; level < grid.levels(); ++level) {
    for (int s = 0; s < substeps; ++s) {
      const double peak = u.cwiseAbs().maxCoeff();
      // Cell Peclet number below 2 keeps central differencing monotone;
      // the advective CFL follows from it and the diffusive limit.
      if (peak * h / nu >= 2.0 || dt * peak / h > 1.0)
        throw ConfigError("burgers_fd_reference: CFL violation at the requested resolution (refine the grid)");
      rhs(u, k1);
      stage = u + dt * k1;
      rhs(stage, k2);
      u = 0.5 * (u + stage + dt * k2);
    }
    out.level(level) = u;
  }
  return out;
}

Field burgers_fd_reference(const InitialDensity& u0, double nu, const GridSpec& grid, const FdOptions& options) {
  const Field fine = burgers_fd_fine(u0, nu, grid, options);
  Field out(grid.space, fine.times());
  const int f = options.refinement;
  for (int k = 0; k < fine.levels(); ++k)
    for (int i = 0; i < grid.space.nodes_per_axis; ++i) out.values()(k, i) = fine.values()(k, f * i);
  return out;
}

}  // namespace mfk
