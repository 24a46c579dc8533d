#pragma once

#include "mfk/field.hpp"
#include "mfk/grid.hpp"
#include "mfk/problem.hpp"
#include "mfk/spectral.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mfk {

/// How the time integrals of the Picard map treat u between levels.
enum class TimeRule {
  linear,      // linear interpolation between levels (implicit at the slab's last level)
  left_point,  // piecewise constant from the left level
};

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 200;
  TimeRule time_rule = TimeRule::linear;
};

/// Largest slab width tau with 2 sqrt(tau) (M_Lambda tau^{3/2} + 2 d M_b C_u) <= 1,
/// capped at the horizon. Bisection on the monotone bound.
double estimate_slab_tau(double drift_bound, double growth_bound, double c_u, int dimension, double ball_radius,
                         double horizon);

/// Ball radius M = max(1, |u0|_inf C_u e^{M_Lambda T}, |u0|_1 e^{M_Lambda T}).
double ball_radius(const ProblemSpec& problem, double c_u);

/// Constant C of the one-step estimate
/// |Pi v1 - Pi v2|(t) <= C int_r^t |v1 - v2|(s) / sqrt(t - s) ds.
double contraction_constant(const ProblemSpec& problem, double c_u, double ball, double tau);

/// Picard iteration on one slab [r, r + tau].
struct PicardState {
  int slab = 0;
  int first_level = 0;  // global index of level r
  double start = 0.0;
  double end = 0.0;
  Field u0_hat;   // kernel-evolved slab initial value
  Field iterate;  // current v
  std::vector<double> residuals;
  int iterations = 0;
};

struct SlabStats {
  int slab = 0;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  std::vector<double> residuals;
  double max_iterate_l1 = 0.0;   // max over iterates and levels of |v(t)|_L1
  double max_iterate_sup = 0.0;  // max over iterates of |v|_inf
  double max_map_sup = 0.0;      // max over iterates of |Pi v|_inf
  bool contraction_ok = true;    // r_{i+2} <= pi C^2 tau max_{j<=i} r_j throughout
};

struct SolveReport {
  bool converged = false;
  int failed_slab = -1;
  std::vector<SlabStats> slabs;
  double c_u = 0.0;
  double q_rate = 0.0;  // c_u of the Gaussian bound
  double ball = 0.0;    // M
  double tau = 0.0;
  double tau_max = 0.0;
  bool tau_certified = false;
  double contraction = 0.0;        // C
  double empirical_sup_constant = 0.0;  // max |Pi v|_inf / sqrt(tau)
  double max_iterate_l1 = 0.0;
  double max_iterate_sup = 0.0;
  double wall_seconds = 0.0;
  GridSpec grid;

  bool ball_preserved() const { return max_iterate_l1 <= ball && max_iterate_sup <= ball; }
  /// key = value lines.
  std::string to_text() const;
};

struct MildSolution {
  Field u;
  SolveReport report;
};

/// Bounded mild solution by slab-wise Picard iteration of
///   Pi(v)(t) = int_r^t int p(s,x0,t,.) Lambda(w) w dx0 ds
///            + sum_j int_r^t int d_{x0,j} p(s,x0,t,.) b_j(w) w dx0 ds,  w = v + u0_hat,
/// glued across slabs through u(k tau). Kernel integrals are applied in
/// Fourier space on the periodized box.
class MildSolver {
 public:
  MildSolver(ProblemSpec problem, GridSpec grid, SolverOptions options = {});
  ~MildSolver();
  MildSolver(MildSolver&&) noexcept;

  /// Grid with the slab width resolved (automatic choice when it was 0).
  const GridSpec& grid() const { return grid_; }
  const ProblemSpec& problem() const { return problem_; }
  const SolverOptions& options() const { return options_; }
  double tau_max() const { return tau_max_; }
  const Kernel& kernel() const { return kernel_; }

  /// Spectral evaluation of u0_hat(r, phi) at time t >= r.
  Eigen::VectorXd evolve(const Eigen::Ref<const Eigen::VectorXd>& phi, double r, double t) const;

  PicardState start_slab(int slab, const Eigen::VectorXd& phi) const;
  /// Pi(state.iterate) on the slab's levels.
  Field picard_map(const PicardState& state) const;

  struct SlabResult {
    Field u;  // u0_hat + v on the slab levels
    PicardState state;
    SlabStats stats;
  };
  /// Iterates from v = 0, or from `initial_guess` (slab levels) when given.
  SlabResult solve_slab(int slab, const Eigen::VectorXd& phi, const Field* initial_guess = nullptr) const;

  MildSolution solve() const;

  /// Linear problem with frozen coefficients: Lambda_hat(t, x) w and
  /// b_hat_j(t, x) w replace the nonlinear sources. Fields live on grid().
  MildSolution solve_linearized(const std::vector<Field>& b_hat, const Field& lambda_hat,
                                const Eigen::VectorXd& u0) const;

  /// Frozen coefficients b(t, x, u(t, x)) (one field per component) and
  /// Lambda(t, x, u(t, x)) of a solution field.
  std::vector<Field> freeze_drift(const Field& u) const;
  Field freeze_growth(const Field& u) const;

 private:
  struct Engine;
  using Source = std::function<void(int level, const Eigen::VectorXd& w, Eigen::VectorXcd& spectrum)>;

  Field picard_map_with(const PicardState& state, const Source& source) const;
  SlabResult solve_slab_with(int slab, const Eigen::VectorXd& phi, const Field* initial_guess,
                             const Source& source) const;
  MildSolution solve_with(const Eigen::VectorXd& u0, const Source& source) const;
  Source nonlinear_source() const;
  std::vector<double> slab_times(int slab) const;

  ProblemSpec problem_;
  GridSpec grid_;
  SolverOptions options_;
  Kernel kernel_;
  double tau_max_ = 0.0;
  std::unique_ptr<Engine> engine_;
};

/// |lhs - rhs| of the weak formulation at time t for test function phi:
///   int phi u(t) = int phi u0 + int_0^t int u L_s phi + sum_j int_0^t int d_j phi b_j(u) u
///                + int_0^t int phi Lambda(u) u,
/// with trapezoid quadrature in space and time.
double weak_residual(const Field& u, const TestFunction& phi, double t, const ProblemSpec& problem);

}  // namespace mfk
