#include "mfk/mild_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <utility>

namespace mfk {

double estimate_slab_tau(double drift_bound, double growth_bound, double c_u, int dimension, double ball,
                         double horizon) {
  // The ball radius scales both sides of the invariance bound and cancels.
  (void)ball;
  auto bound = [&](double tau) {
    return 2.0 * std::sqrt(tau) * (growth_bound * std::pow(tau, 1.5) + 2.0 * dimension * drift_bound * c_u);
  };
  if (bound(horizon) <= 1.0) return horizon;
  double lo = 0.0;
  double hi = horizon;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * horizon; ++i) {
    const double mid = 0.5 * (lo + hi);
    (bound(mid) <= 1.0 ? lo : hi) = mid;
  }
  return lo;
}

double ball_radius(const ProblemSpec& problem, double c_u) {
  const double growth = std::exp(problem.constants.growth_bound * problem.horizon);
  return std::max({1.0, problem.initial.sup_norm() * c_u * growth, growth});
}

double contraction_constant(const ProblemSpec& problem, double c_u, double ball, double tau) {
  const auto& c = problem.constants;
  const double growth = 2.0 * c.growth_lipschitz * ball + c.growth_bound;
  const double drift = problem.dimension * c_u * (2.0 * c.drift_lipschitz * ball + c.drift_bound);
  return std::max(growth, drift) * (1.0 + std::sqrt(tau));
}

std::string SolveReport::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "converged = " << (converged ? "true" : "false") << '\n';
  out << "failed_slab = " << failed_slab << '\n';
  out << "slab_count = " << slabs.size() << '\n';
  out << "tau = " << tau << '\n';
  out << "tau_max = " << tau_max << '\n';
  out << "tau_certified = " << (tau_certified ? "true" : "false") << '\n';
  out << "C_u = " << c_u << '\n';
  out << "c_u = " << q_rate << '\n';
  out << "ball_radius = " << ball << '\n';
  out << "contraction_constant = " << contraction << '\n';
  out << "empirical_sup_constant = " << empirical_sup_constant << '\n';
  out << "max_iterate_l1 = " << max_iterate_l1 << '\n';
  out << "max_iterate_sup = " << max_iterate_sup << '\n';
  out << "ball_preserved = " << (ball_preserved() ? "true" : "false") << '\n';
  out << "wall_seconds = " << wall_seconds << '\n';
  out << "grid.dimension = " << grid.space.dimension << '\n';
  out << "grid.radius = " << grid.space.radius << '\n';
  out << "grid.nodes_per_axis = " << grid.space.nodes_per_axis << '\n';
  out << "grid.horizon = " << grid.horizon << '\n';
  out << "grid.time_steps = " << grid.time_steps << '\n';
  for (const auto& s : slabs) {
    const std::string key = "slab." + std::to_string(s.slab) + ".";
    out << key << "iterations = " << s.iterations << '\n';
    out << key << "converged = " << (s.converged ? "true" : "false") << '\n';
    out << key << "final_residual = " << s.final_residual << '\n';
    out << key << "contraction_ok = " << (s.contraction_ok ? "true" : "false") << '\n';
    out << key << "residuals =";
    for (double r : s.residuals) out << ' ' << r;
    out << '\n';
  }
  return out.str();
}

// Spectral grid, symbols and cached interval weights.
struct MildSolver::Engine {
  SpectralGrid spectral;
  TransitionSymbols symbols;
  std::vector<Eigen::VectorXcd> minus_derivative;  // -i k_j
  bool homogeneous;
  double dt;
  std::vector<double> times;

  mutable std::mutex mutex;
  // Homogeneous: keyed by (lag, 0); otherwise by (k, n).
  mutable std::map<std::pair<int, int>, TransitionSymbols::IntervalWeights> weights;
  mutable std::map<std::pair<int, int>, Eigen::VectorXcd> propagators;

  Engine(const Kernel& kernel, const GridSpec& grid)
      : spectral(grid.space),
        symbols(kernel, spectral),
        homogeneous(kernel.time_homogeneous()),
        dt(grid.time_step()),
        times(level_times(grid)) {
    for (int a = 0; a < grid.space.dimension; ++a) minus_derivative.push_back(-spectral.derivative_symbol(a));
  }

  std::pair<int, int> key(int k, int n) const { return homogeneous ? std::make_pair(n - k, 0) : std::make_pair(k, n); }

  // Weights of the interval [t_k, t_{k+1}] seen from t_n.
  const TransitionSymbols::IntervalWeights& interval(int k, int n) const {
    const auto id = key(k, n);
    {
      std::lock_guard lock(mutex);
      const auto it = weights.find(id);
      if (it != weights.end()) return it->second;
    }
    auto w = homogeneous ? symbols.interval(0.0, dt, (n - k) * dt) : symbols.interval(times[k], times[k + 1], times[n]);
    std::lock_guard lock(mutex);
    return weights.try_emplace(id, std::move(w)).first->second;
  }

  const Eigen::VectorXcd& propagator(int k, int n) const {
    const auto id = key(k, n);
    {
      std::lock_guard lock(mutex);
      const auto it = propagators.find(id);
      if (it != propagators.end()) return it->second;
    }
    auto p = homogeneous ? symbols.propagator(0.0, (n - k) * dt) : symbols.propagator(times[k], times[n]);
    std::lock_guard lock(mutex);
    return propagators.try_emplace(id, std::move(p)).first->second;
  }
};

MildSolver::MildSolver(ProblemSpec problem, GridSpec grid, SolverOptions options)
    : problem_(std::move(problem)), grid_(std::move(grid)), options_(options), kernel_(problem_.kernel()) {
  if (grid_.space.dimension != problem_.dimension) throw ConfigError("mild solver: grid and problem dimensions differ");
  if (std::abs(grid_.horizon - problem_.horizon) > 1e-12 * problem_.horizon)
    throw ConfigError("mild solver: grid horizon differs from the problem horizon");
  if (!(options_.tol > 0.0)) throw ConfigError("mild solver: tol must be positive");
  if (options_.max_iter < 1) throw ConfigError("mild solver: max_iter must be >= 1");
  const double c_u = kernel_.bounds().C_u;
  const auto& c = problem_.constants;
  tau_max_ = estimate_slab_tau(c.drift_bound, c.growth_bound, c_u, problem_.dimension,
                               ball_radius(problem_, c_u), problem_.horizon);
  if (grid_.slab_width == 0.0) {
    // Fewest slabs whose width is a whole number of steps not above tau_max.
    int steps = 1;
    for (int s = grid_.time_steps; s >= 1; --s) {
      if (grid_.time_steps % s == 0 && s * grid_.time_step() <= tau_max_ * (1.0 + 1e-12)) {
        steps = s;
        break;
      }
    }
    grid_.slab_width = steps * grid_.time_step();
  }
  grid_.validate();
  engine_ = std::make_unique<Engine>(kernel_, grid_);
}

MildSolver::~MildSolver() = default;
MildSolver::MildSolver(MildSolver&&) noexcept = default;

std::vector<double> MildSolver::slab_times(int slab) const {
  const int m = grid_.steps_per_slab();
  std::vector<double> t(m + 1);
  for (int j = 0; j <= m; ++j) t[j] = grid_.time(slab * m + j);
  return t;
}

Eigen::VectorXd MildSolver::evolve(const Eigen::Ref<const Eigen::VectorXd>& phi, double r, double t) const {
  if (t < r) throw std::invalid_argument("evolve: needs t >= r");
  if (t == r) return phi;
  const Eigen::VectorXcd spectrum = engine_->spectral.forward(phi);
  const int k = static_cast<int>(std::lround(r / grid_.time_step()));
  const int n = static_cast<int>(std::lround(t / grid_.time_step()));
  const bool on_grid = std::abs(k * grid_.time_step() - r) < 1e-12 && std::abs(n * grid_.time_step() - t) < 1e-12;
  const Eigen::VectorXcd symbol = on_grid ? engine_->propagator(k, n) : engine_->symbols.propagator(r, t);
  return engine_->spectral.inverse(spectrum.cwiseProduct(symbol));
}

PicardState MildSolver::start_slab(int slab, const Eigen::VectorXd& phi) const {
  if (slab < 0 || slab >= grid_.slab_count()) throw std::out_of_range("start_slab: slab index out of range");
  if (phi.size() != grid_.space.size()) throw std::invalid_argument("start_slab: phi has the wrong size");
  PicardState state;
  state.slab = slab;
  state.first_level = slab * grid_.steps_per_slab();
  const auto times = slab_times(slab);
  state.start = times.front();
  state.end = times.back();
  state.u0_hat = Field(grid_.space, times);
  state.iterate = Field(grid_.space, times);
  const Eigen::VectorXcd spectrum = engine_->spectral.forward(phi);
  state.u0_hat.level(0) = phi;
  for (int j = 1; j < state.u0_hat.levels(); ++j)
    state.u0_hat.level(j) = engine_->spectral.inverse(
        spectrum.cwiseProduct(engine_->propagator(state.first_level, state.first_level + j)));
  return state;
}

MildSolver::Source MildSolver::nonlinear_source() const {
  const Engine* engine = engine_.get();
  const ProblemSpec* problem = &problem_;
  const GridSpec* grid = &grid_;
  const bool drift = problem_.has_drift();
  const bool growth = problem_.has_growth();
  return [engine, problem, grid, drift, growth](int level, const Eigen::VectorXd& w, Eigen::VectorXcd& spectrum) {
    const int d = problem->dimension;
    const double t = grid->time(level);
    const Eigen::Index n = w.size();
    Eigen::VectorXd x(d), b(d);
    Eigen::VectorXd lambda_w = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd b_w = Eigen::MatrixXd::Zero(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      grid->space.node(j, x);
      if (growth) lambda_w[j] = problem->growth_rate(t, x, w[j]) * w[j];
      if (drift) {
        problem->interaction_drift(t, x, w[j], b);
        b_w.col(j) = b * w[j];
      }
    }
    spectrum = growth ? engine->spectral.forward(lambda_w) : Eigen::VectorXcd::Zero(n);
    if (drift)
      for (int a = 0; a < d; ++a)
        spectrum += engine->spectral.forward(b_w.row(a).transpose()).cwiseProduct(engine->minus_derivative[a]);
  };
}

Field MildSolver::picard_map(const PicardState& state) const { return picard_map_with(state, nonlinear_source()); }

Field MildSolver::picard_map_with(const PicardState& state, const Source& source) const {
  const int levels = state.iterate.levels();
  const Eigen::Index n = grid_.space.size();
  std::vector<Eigen::VectorXcd> sources(levels);
  const bool linear = options_.time_rule == TimeRule::linear;
  // The left-point rule never reads the last level.
  const int used = linear ? levels : levels - 1;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < used; ++j) {
    const Eigen::VectorXd w = state.iterate.level(j) + state.u0_hat.level(j);
    source(state.first_level + j, w, sources[j]);
  }
  const int g0 = state.first_level;
  for (int j = 1; j < levels; ++j)
    for (int k = 0; k < j; ++k) engine_->interval(g0 + k, g0 + j);  // fill the cache serially

  Field out(grid_.space, state.iterate.times());
#pragma omp parallel for schedule(static)
  for (int j = 1; j < levels; ++j) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
    for (int k = 0; k < j; ++k) {
      const auto& w = engine_->interval(g0 + k, g0 + j);
      if (linear) {
        acc += w.left.cwiseProduct(sources[k]) + w.right.cwiseProduct(sources[k + 1]);
      } else {
        acc += (w.left + w.right).cwiseProduct(sources[k]);
      }
    }
    out.level(j) = engine_->spectral.inverse(acc);
  }
  return out;
}

MildSolver::SlabResult MildSolver::solve_slab(int slab, const Eigen::VectorXd& phi,
                                              const Field* initial_guess) const {
  return solve_slab_with(slab, phi, initial_guess, nonlinear_source());
}

MildSolver::SlabResult MildSolver::solve_slab_with(int slab, const Eigen::VectorXd& phi, const Field* initial_guess,
                                                   const Source& source) const {
  SlabResult result;
  result.state = start_slab(slab, phi);
  PicardState& state = result.state;
  if (initial_guess) {
    if (initial_guess->levels() != state.iterate.levels() || initial_guess->space() != grid_.space)
      throw std::invalid_argument("solve_slab: initial guess does not match the slab grid");
    state.iterate.values() = initial_guess->values();
  }
  SlabStats& stats = result.stats;
  stats.slab = slab;
  const double tau = state.end - state.start;
  const double c_u = kernel_.bounds().C_u;
  const double ball = ball_radius(problem_, c_u);
  const double factor = std::numbers::pi * std::pow(contraction_constant(problem_, c_u, ball, tau), 2) * tau;

  auto track = [&](const Field& v) {
    for (int j = 0; j < v.levels(); ++j) {
      stats.max_iterate_l1 = std::max(stats.max_iterate_l1, v.l1_norm(j));
      stats.max_iterate_sup = std::max(stats.max_iterate_sup, v.sup_norm(j));
    }
  };
  track(state.iterate);
  Field diff(grid_.space, state.iterate.times());
  while (state.iterations < options_.max_iter) {
    Field next = picard_map_with(state, source);
    for (int j = 0; j < next.levels(); ++j) stats.max_map_sup = std::max(stats.max_map_sup, next.sup_norm(j));
    track(next);
    diff.values() = next.values() - state.iterate.values();
    const double residual = diff.global_l1();
    state.iterate = std::move(next);
    state.residuals.push_back(residual);
    ++state.iterations;
    const auto& r = state.residuals;
    const std::size_t i = r.size() - 1;
    if (i >= 2) {
      const double reference = *std::max_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(i - 1));
      if (r[i] > factor * reference * (1.0 + 1e-12) + 1e-300) stats.contraction_ok = false;
    }
    if (!std::isfinite(residual)) break;
    if (residual <= options_.tol) {
      stats.converged = true;
      break;
    }
  }
  stats.iterations = state.iterations;
  stats.residuals = state.residuals;
  stats.final_residual = state.residuals.empty() ? 0.0 : state.residuals.back();
  result.u = Field(grid_.space, state.iterate.times());
  result.u.values() = state.u0_hat.values() + state.iterate.values();
  return result;
}

MildSolution MildSolver::solve() const { return solve_with(problem_.initial.sample_on(grid_.space), nonlinear_source()); }

MildSolution MildSolver::solve_with(const Eigen::VectorXd& u0, const Source& source) const {
  const auto start = std::chrono::steady_clock::now();
  MildSolution sol{Field(grid_.space, level_times(grid_)), {}};
  SolveReport& rep = sol.report;
  rep.grid = grid_;
  rep.c_u = kernel_.bounds().C_u;
  rep.q_rate = kernel_.bounds().c_u;
  rep.ball = ball_radius(problem_, rep.c_u);
  rep.tau = grid_.slab_width;
  rep.tau_max = tau_max_;
  rep.tau_certified = rep.tau <= tau_max_ * (1.0 + 1e-12);
  rep.contraction = contraction_constant(problem_, rep.c_u, rep.ball, rep.tau);
  rep.converged = true;

  const int m = grid_.steps_per_slab();
  Eigen::VectorXd phi = u0;
  sol.u.level(0) = u0;
  for (int slab = 0; slab < grid_.slab_count(); ++slab) {
    SlabResult r = solve_slab_with(slab, phi, nullptr, source);
    for (int j = 1; j <= m; ++j) sol.u.level(slab * m + j) = r.u.level(j);
    phi = r.u.level(m);
    rep.max_iterate_l1 = std::max(rep.max_iterate_l1, r.stats.max_iterate_l1);
    rep.max_iterate_sup = std::max(rep.max_iterate_sup, r.stats.max_iterate_sup);
    rep.empirical_sup_constant = std::max(rep.empirical_sup_constant, r.stats.max_map_sup / std::sqrt(rep.tau));
    const bool ok = r.stats.converged;
    rep.slabs.push_back(std::move(r.stats));
    if (!ok) {
      rep.converged = false;
      rep.failed_slab = slab;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

MildSolution MildSolver::solve_linearized(const std::vector<Field>& b_hat, const Field& lambda_hat,
                                          const Eigen::VectorXd& u0) const {
  const int d = problem_.dimension;
  if (static_cast<int>(b_hat.size()) != d) throw std::invalid_argument("solve_linearized: need one drift field per axis");
  auto check = [&](const Field& f) {
    if (f.space() != grid_.space || f.levels() != grid_.levels())
      throw std::invalid_argument("solve_linearized: coefficient field does not match the grid");
  };
  for (const auto& f : b_hat) check(f);
  check(lambda_hat);
  if (u0.size() != grid_.space.size()) throw std::invalid_argument("solve_linearized: u0 has the wrong size");
  const Engine* engine = engine_.get();
  Source source = [engine, &b_hat, &lambda_hat, d](int level, const Eigen::VectorXd& w, Eigen::VectorXcd& spectrum) {
    spectrum = engine->spectral.forward(lambda_hat.level(level).cwiseProduct(w));
    for (int a = 0; a < d; ++a)
      spectrum += engine->spectral.forward(b_hat[a].level(level).cwiseProduct(w))
                      .cwiseProduct(engine->minus_derivative[a]);
  };
  return solve_with(u0, source);
}

std::vector<Field> MildSolver::freeze_drift(const Field& u) const {
  const int d = problem_.dimension;
  std::vector<Field> out(d, Field(u.space(), u.times()));
  Eigen::VectorXd x(d), b(d);
  for (int k = 0; k < u.levels(); ++k) {
    for (Eigen::Index j = 0; j < u.space().size(); ++j) {
      u.space().node(j, x);
      problem_.interaction_drift(u.times()[k], x, u.values()(k, j), b);
      for (int a = 0; a < d; ++a) out[a].values()(k, j) = b[a];
    }
  }
  return out;
}

Field MildSolver::freeze_growth(const Field& u) const {
  Field out(u.space(), u.times());
  Eigen::VectorXd x(problem_.dimension);
  for (int k = 0; k < u.levels(); ++k) {
    for (Eigen::Index j = 0; j < u.space().size(); ++j) {
      u.space().node(j, x);
      out.values()(k, j) = problem_.growth_rate(u.times()[k], x, u.values()(k, j));
    }
  }
  return out;
}

double weak_residual(const Field& u, const TestFunction& phi, double t, const ProblemSpec& problem) {
  const int last = u.level_at(t);
  if (last < 0) throw std::invalid_argument("weak_residual: t is not a time level of the field");
  const SpatialGrid& space = u.space();
  const int d = problem.dimension;
  const Eigen::VectorXd& w = u.weights();
  Eigen::VectorXd phi_values(space.size());
  Eigen::MatrixXd grads(d, space.size());
  Eigen::VectorXd x(d), b(d);
  for (Eigen::Index j = 0; j < space.size(); ++j) {
    space.node(j, x);
    phi_values[j] = phi.value(x);
    grads.col(j) = phi.gradient(x);
  }
  // Integrand of the time integral at level k.
  auto rate = [&](int k) {
    const double s = u.times()[k];
    double total = 0.0;
    for (Eigen::Index j = 0; j < space.size(); ++j) {
      const double z = u.values()(k, j);
      if (z == 0.0) continue;
      space.node(j, x);
      double local = apply_generator(problem, phi, s, x) + phi_values[j] * problem.growth_rate(s, x, z);
      problem.interaction_drift(s, x, z, b);
      local += grads.col(j).dot(b);
      total += w[j] * local * z;
    }
    return total;
  };
  double integral = 0.0;
  double previous = rate(0);
  for (int k = 0; k < last; ++k) {
    const double next = rate(k + 1);
    integral += 0.5 * (u.times()[k + 1] - u.times()[k]) * (previous + next);
    previous = next;
  }
  const double lhs = w.dot(phi_values.cwiseProduct(u.level(last)));
  const double rhs = w.dot(phi_values.cwiseProduct(u.level(0))) + integral;
  return std::abs(lhs - rhs);
}

}  // namespace mfk
