#include "mfk/particle_solver.hpp"

#include "mfk/rng.hpp"
#include "mfk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfk {

int ParticleEnsemble::record_index(double t) const {
  for (std::size_t r = 0; r < times.size(); ++r)
    if (std::abs(times[r] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(r);
  throw std::invalid_argument("particle ensemble: time " + std::to_string(t) + " was not recorded");
}

namespace {

using Lookup = std::function<double(int step, PointRef x)>;

int whole_ratio(double a, double b, const char* what) {
  const double ratio = a / b;
  const long n = std::lround(ratio);
  if (n < 0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) throw ConfigError(what);
  return static_cast<int>(n);
}

struct StepCoefficients {
  std::vector<Eigen::MatrixXd> dispersion;  // Phi(t_k) sqrt(dt)
  std::vector<Eigen::VectorXd> drift;       // b0(t_k)
};

StepCoefficients step_coefficients(const ProblemSpec& problem, int steps, double dt) {
  StepCoefficients c;
  c.dispersion.reserve(steps);
  c.drift.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    c.dispersion.push_back(problem.dispersion(k * dt) * std::sqrt(dt));
    c.drift.push_back(problem.base_drift(k * dt));
  }
  return c;
}

// Advances particle i from step `first` to `first + count`. Counter
// d (k + 1) + a of the particle's stream drives axis a at step k.
void advance_particle(const ProblemSpec& problem, const StepCoefficients& coeff, const CounterNormal& normal,
                      int first, int count, double dt, WeightRule rule, const Lookup& lookup,
                      Eigen::Ref<Eigen::VectorXd> y, double& log_weight) {
  const int d = problem.dimension;
  Eigen::VectorXd b(d), xi(d);
  for (int k = first; k < first + count; ++k) {
    const double t = k * dt;
    const double z = lookup(k, y);
    const double rate = problem.growth_rate(t, y, z);
    problem.interaction_drift(t, y, z, b);
    for (int a = 0; a < d; ++a) xi[a] = normal(static_cast<std::uint64_t>(d) * (k + 1) + a);
    y += (coeff.drift[k] + b) * dt + coeff.dispersion[k] * xi;
    if (rule == WeightRule::left_point) {
      log_weight += rate * dt;
    } else {
      const double z1 = lookup(k + 1, y);
      log_weight += 0.5 * dt * (rate + problem.growth_rate(t + dt, y, z1));
    }
  }
}

std::vector<int> record_steps(const ParticleOptions& options, const std::vector<double>& field_times, double dt,
                              std::vector<double>& times) {
  times = options.record_times.empty() ? field_times : options.record_times;
  std::vector<int> steps;
  for (double t : times) steps.push_back(whole_ratio(t, dt, "particles: record times must be multiples of dt"));
  return steps;
}

void validate(const ParticleOptions& options, const ProblemSpec& problem) {
  if (options.particles < 1) throw ConfigError("particles: N must be >= 1");
  if (!(options.dt > 0.0)) throw ConfigError("particles: dt must be positive");
  if (problem.initial.dimension() != problem.dimension) throw ConfigError("particles: u0 dimension mismatch");
}

}  // namespace

ParticleEnsemble simulate_frozen(const Field& u, const ProblemSpec& problem, const ParticleOptions& options) {
  validate(options, problem);
  if (u.space().dimension != problem.dimension) throw ConfigError("simulate_frozen: field dimension mismatch");
  if (u.levels() < 2) throw ConfigError("simulate_frozen: field needs at least two levels");
  const double field_dt = u.times()[1] - u.times()[0];
  const int per_level = whole_ratio(field_dt, options.dt, "simulate_frozen: dt must divide the field's time spacing");
  if (per_level < 1) throw ConfigError("simulate_frozen: dt must divide the field's time spacing");
  const int steps = per_level * (u.levels() - 1);
  const double dt = field_dt / per_level;

  ParticleEnsemble ens;
  ens.particles = options.particles;
  ens.dimension = problem.dimension;
  ens.dt = dt;
  ens.seed = options.seed;
  const std::vector<int> rec = record_steps(options, u.times(), dt, ens.times);
  for (int s : rec)
    if (s > steps) throw ConfigError("simulate_frozen: record time beyond the field horizon");
  ens.positions.assign(rec.size(), Eigen::MatrixXd(problem.dimension, options.particles));
  ens.log_weights.assign(rec.size(), Eigen::VectorXd(options.particles));

  const StepCoefficients coeff = step_coefficients(problem, steps, dt);
  const Lookup lookup = [&u, per_level, steps](int step, PointRef x) {
    const int level = std::min(step, steps) / per_level;
    const Eigen::Index node = u.space().nearest(x);
    return node < 0 ? 0.0 : u.values()(level, node);
  };

#pragma omp parallel for schedule(static)
  for (int i = 0; i < options.particles; ++i) {
    const CounterNormal normal(options.seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd y(problem.dimension);
    problem.initial.draw(options.seed, static_cast<std::uint64_t>(i), y);
    double log_weight = 0.0;
    int at = 0;
    for (std::size_t r = 0; r < rec.size(); ++r) {
      // Records need not be sorted; restart from the origin when going back.
      if (rec[r] < at) {
        problem.initial.draw(options.seed, static_cast<std::uint64_t>(i), y);
        log_weight = 0.0;
        at = 0;
      }
      advance_particle(problem, coeff, normal, at, rec[r] - at, dt, options.weight_rule, lookup, y, log_weight);
      at = rec[r];
      ens.positions[r].col(i) = y;
      ens.log_weights[r][i] = log_weight;
    }
  }
  return ens;
}

Estimate weighted_functional(const ParticleEnsemble& ensemble, const std::function<double(PointRef)>& phi, double t) {
  const int r = ensemble.record_index(t);
  const int n = ensemble.particles;
  Eigen::VectorXd values(n);
  for (int i = 0; i < n; ++i)
    values[i] = phi(ensemble.positions[r].col(i)) * std::exp(ensemble.log_weights[r][i]);
  Estimate e;
  e.value = values.mean();
  if (n > 1) {
    const double var = (values.array() - e.value).square().sum() / (n - 1);
    e.standard_error = std::sqrt(var / n);
  }
  return e;
}

double silverman_bandwidth(const ParticleEnsemble& ensemble, int record) {
  const Eigen::ArrayXd w = ensemble.log_weights[record].array().exp();
  const double total = w.sum();
  const double n_eff = total * total / w.square().sum();
  const Eigen::MatrixXd& y = ensemble.positions[record];
  const int d = ensemble.dimension;
  double var = 0.0;
  for (int a = 0; a < d; ++a) {
    const Eigen::ArrayXd row = y.row(a).transpose().array();
    const double mean = (w * row).sum() / total;
    var += (w * (row - mean).square()).sum() / total;
  }
  const double sigma = std::sqrt(var / d);
  return sigma * std::pow(4.0 / ((d + 2.0) * n_eff), 1.0 / (d + 4.0));
}

DensityEstimate density_estimate(const ParticleEnsemble& ensemble, double t, double bandwidth,
                                 const SpatialGrid& space, KdeMethod method) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("density_estimate: bandwidth must be positive");
  if (space.dimension != ensemble.dimension) throw std::invalid_argument("density_estimate: dimension mismatch");
  const int r = ensemble.record_index(t);
  const int d = ensemble.dimension;
  const int n = ensemble.particles;
  const Eigen::MatrixXd& y = ensemble.positions[r];
  const Eigen::VectorXd w = ensemble.log_weights[r].array().exp().matrix();
  DensityEstimate est{t, bandwidth, space, Eigen::VectorXd::Zero(space.size())};

  if (method == KdeMethod::direct) {
    const double norm = 1.0 / (n * std::pow(2.0 * std::numbers::pi * bandwidth * bandwidth, d / 2.0));
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < space.size(); ++j) {
      Eigen::VectorXd x(d);
      space.node(j, x);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += w[i] * std::exp(-(y.col(i) - x).squaredNorm() * inv);
      est.values[j] = sum * norm;
    }
    return est;
  }

  // Multilinear binning onto the nodes; particles outside the box are dropped.
  const double h = space.spacing();
  const int m = space.nodes_per_axis;
  Eigen::VectorXd bins = Eigen::VectorXd::Zero(space.size());
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int i = 0; i < n; ++i) {
    bool inside = true;
    for (int a = 0; a < d && inside; ++a) {
      const double s = (y(a, i) + space.radius) / h;
      if (!(s >= 0.0 && s <= m - 1)) inside = false;
      base[a] = std::min(static_cast<int>(s), m - 2);
      frac[a] = s - base[a];
    }
    if (!inside) continue;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double weight = w[i];
      Eigen::Index flat = 0, stride = 1;
      for (int a = 0; a < d; ++a) {
        const int up = (corner >> a) & 1;
        weight *= up ? frac[a] : 1.0 - frac[a];
        flat += (base[a] + up) * stride;
        stride *= m;
      }
      bins[flat] += weight;
    }
  }
  bins /= n * std::pow(h, d);
  const SpectralGrid spectral(space);
  Eigen::VectorXcd spectrum = spectral.forward(bins);
  const Eigen::MatrixXd& k = spectral.wavenumbers();
  for (Eigen::Index j = 0; j < spectrum.size(); ++j)
    spectrum[j] *= std::exp(-0.5 * bandwidth * bandwidth * k.col(j).squaredNorm());
  est.values = spectral.inverse(spectrum);
  return est;
}

SelfConsistentResult solve_selfconsistent(const ProblemSpec& problem, const GridSpec& grid,
                                          const SelfConsistentOptions& options) {
  const ParticleOptions& po = options.particles;
  validate(po, problem);
  grid.space.validate();
  if (grid.space.dimension != problem.dimension) throw ConfigError("solve_selfconsistent: grid dimension mismatch");
  const int per_level =
      whole_ratio(grid.time_step(), po.dt, "solve_selfconsistent: dt must divide the grid's time spacing");
  if (per_level < 1) throw ConfigError("solve_selfconsistent: dt must divide the grid's time spacing");
  const int steps = per_level * grid.time_steps;
  const double dt = grid.time_step() / per_level;
  const int n = po.particles;
  const int d = problem.dimension;

  SelfConsistentResult out;
  out.u = Field(grid.space, level_times(grid));
  ParticleEnsemble& ens = out.ensemble;
  ens.particles = n;
  ens.dimension = d;
  ens.dt = dt;
  ens.seed = po.seed;
  const std::vector<int> rec = record_steps(po, out.u.times(), dt, ens.times);
  for (std::size_t r = 1; r < rec.size(); ++r)
    if (rec[r] < rec[r - 1]) throw ConfigError("solve_selfconsistent: record times must be increasing");
  ens.positions.assign(rec.size(), Eigen::MatrixXd(d, n));
  ens.log_weights.assign(rec.size(), Eigen::VectorXd(n));

  Eigen::MatrixXd y(d, n);
  Eigen::VectorXd log_weights = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) problem.initial.draw(po.seed, static_cast<std::uint64_t>(i), y.col(i));
  const StepCoefficients coeff = step_coefficients(problem, steps, dt);

  // Scratch ensemble holding the current state for the KDE.
  ParticleEnsemble current;
  current.particles = n;
  current.dimension = d;
  current.dt = dt;
  current.times = {0.0};
  current.positions.resize(1);
  current.log_weights.resize(1);

  std::size_t next_record = 0;
  auto record = [&](int step) {
    while (next_record < rec.size() && rec[next_record] == step) {
      ens.positions[next_record] = y;
      ens.log_weights[next_record] = log_weights;
      ++next_record;
    }
  };
  record(0);
  out.u.level(0) = problem.initial.sample_on(grid.space);
  for (int level = 0; level < grid.time_steps; ++level) {
    if (level > 0) {
      current.times[0] = grid.time(level);
      current.positions[0] = y;
      current.log_weights[0] = log_weights;
      const double h = options.bandwidth > 0.0 ? options.bandwidth : silverman_bandwidth(current, 0);
      out.u.level(level) = density_estimate(current, grid.time(level), h, grid.space, options.kde).values;
    }
    const Eigen::VectorXd slice = out.u.level(level);
    const Lookup lookup = [&slice, &grid](int, PointRef x) {
      const Eigen::Index node = grid.space.nearest(x);
      return node < 0 ? 0.0 : slice[node];
    };
    const int first = level * per_level;
    for (int s = 0; s < per_level; ++s) {
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) {
        const CounterNormal normal(po.seed, static_cast<std::uint64_t>(i));
        advance_particle(problem, coeff, normal, first + s, 1, dt, po.weight_rule, lookup, y.col(i),
                         log_weights[i]);
      }
      record(first + s + 1);
    }
  }
  current.times[0] = grid.horizon;
  current.positions[0] = y;
  current.log_weights[0] = log_weights;
  const double h = options.bandwidth > 0.0 ? options.bandwidth : silverman_bandwidth(current, 0);
  out.u.level(grid.time_steps) = density_estimate(current, grid.horizon, h, grid.space, options.kde).values;
  if (next_record != rec.size()) throw ConfigError("solve_selfconsistent: record time beyond the horizon");
  return out;
}

}  // namespace mfk
