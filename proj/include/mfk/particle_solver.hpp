#pragma once

#include "mfk/field.hpp"
#include "mfk/grid.hpp"
#include "mfk/problem.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace mfk {

enum class WeightRule { left_point, trapezoid };
enum class KdeMethod { direct, binned };

struct ParticleOptions {
  int particles = 100000;
  double dt = 1.0 / 256.0;
  std::uint64_t seed = 1;
  /// Times at which positions and log-weights are stored; empty means every
  /// level of the field grid. Each must be a multiple of dt.
  std::vector<double> record_times;
  WeightRule weight_rule = WeightRule::left_point;
};

/// N Euler-Maruyama trajectories with accumulated log Feynman-Kac weights,
/// stored at the recorded times.
struct ParticleEnsemble {
  int particles = 0;
  int dimension = 1;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;               // recorded times
  std::vector<Eigen::MatrixXd> positions;  // per recorded time: d x N
  std::vector<Eigen::VectorXd> log_weights;

  /// Index of the recorded time equal to t, or throws.
  int record_index(double t) const;
};

/// Y_{k+1} = Y_k + (b0 + b(t_k, Y_k, u(t_k, Y_k))) dt + Phi(t_k) sqrt(dt) xi,
/// L_{k+1} = L_k + Lambda(t_k, Y_k, u(t_k, Y_k)) dt, with u looked up at the
/// nearest node and the left field level (zero outside the box).
ParticleEnsemble simulate_frozen(const Field& u, const ProblemSpec& problem, const ParticleOptions& options);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// (1/N) sum phi(Y_i) exp(L_i) and its standard error.
Estimate weighted_functional(const ParticleEnsemble& ensemble, const std::function<double(PointRef)>& phi, double t);

struct DensityEstimate {
  double time = 0.0;
  double bandwidth = 0.0;
  SpatialGrid space;
  Eigen::VectorXd values;
};

/// Silverman's rule with the effective sample size (sum w)^2 / sum w^2.
double silverman_bandwidth(const ParticleEnsemble& ensemble, int record);

/// Weighted Gaussian KDE (1/N) sum exp(L_i) G_h(x - Y_i) on the grid nodes.
/// `binned` uses linear binning and FFT smoothing; `direct` sums exactly.
DensityEstimate density_estimate(const ParticleEnsemble& ensemble, double t, double bandwidth,
                                 const SpatialGrid& space, KdeMethod method = KdeMethod::direct);

struct SelfConsistentOptions {
  ParticleOptions particles;
  double bandwidth = 0.0;  // 0 selects Silverman at every level
  KdeMethod kde = KdeMethod::binned;
};

struct SelfConsistentResult {
  ParticleEnsemble ensemble;
  Field u;
};

/// Time-marching closure: u(t_k) is the weighted KDE of the ensemble at
/// level k (u(0) = u0 exactly) and drives the particles up to t_{k+1}.
SelfConsistentResult solve_selfconsistent(const ProblemSpec& problem, const GridSpec& grid,
                                          const SelfConsistentOptions& options);

}  // namespace mfk
