#include "mfk/mild_solver.hpp"
#include "mfk/oracles.hpp"
#include "mfk/particle_solver.hpp"

#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <numbers>

using namespace mfk;

namespace {

GridSpec grid(int steps = 64, double slab = 0.25) { return {SpatialGrid{1, 8.0, 512}, 1.0, steps, slab}; }

Field zero_field(const GridSpec& g) { return Field(g.space, level_times(g)); }

ParticleOptions options(int n, std::uint64_t seed, std::vector<double> times = {}) {
  ParticleOptions o;
  o.particles = n;
  o.dt = 1.0 / 256;
  o.seed = seed;
  o.record_times = std::move(times);
  return o;
}

}  // namespace

TEST_CASE("heat: Brownian variance at t = 1") {
  PresetParameters p;
  p.u0_variance = 1e-6;
  const ProblemSpec heat = preset("heat", p);
  const auto ens = simulate_frozen(zero_field(grid()), heat, options(100000, 5, {0.0, 1.0}));
  const Eigen::ArrayXd y = ens.positions[1].row(0).transpose().array();
  const double mean = y.mean();
  const double var = (y - mean).square().sum() / (y.size() - 1);
  const double se = var * std::sqrt(2.0 / (y.size() - 1));
  CHECK(std::abs(var - (1.0 + 1e-6)) <= 3 * se);
  CHECK(ens.log_weights[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exponential growth: log-weights are exactly lambda t") {
  const ProblemSpec growth = preset("exponential_growth");
  const auto ens = simulate_frozen(zero_field(grid()), growth, options(1000, 2));
  for (std::size_t r = 0; r < ens.times.size(); ++r)
    CHECK((ens.log_weights[r].array() == 0.5 * ens.times[r]).all());
  const Estimate e = weighted_functional(ens, [](PointRef) { return 1.0; }, 1.0);
  CHECK(e.value == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
  CHECK(e.standard_error <= 1e-12);
  ParticleOptions trap = options(1000, 2);
  trap.weight_rule = WeightRule::trapezoid;
  const auto t = simulate_frozen(zero_field(grid()), growth, trap);
  CHECK(t.log_weights.back()[7] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("unit weights give exactly one") {
  const auto ens = simulate_frozen(zero_field(grid()), preset("heat"), options(1000, 3));
  const Estimate e = weighted_functional(ens, [](PointRef) { return 1.0; }, 0.5);
  CHECK(e.value == 1.0);
  CHECK(e.standard_error == 0.0);
}

TEST_CASE("Burgers: initial drift functional matches quadrature") {
  const ProblemSpec burgers = preset("burgers");
  const MildSolution mild = MildSolver(burgers, grid()).solve();
  const auto ens = simulate_frozen(mild.u, burgers, options(100000, 9, {0.0}));
  Eigen::VectorXd b(1);
  const Estimate e = weighted_functional(
      ens,
      [&](PointRef x) {
        const Eigen::Index node = mild.u.space().nearest(x);
        const double z = node < 0 ? 0.0 : mild.u.values()(0, node);
        burgers.interaction_drift(0, x, z, b);
        return b[0];
      },
      0.0);
  const Eigen::ArrayXd u0 = mild.u.level(0).array();
  const double reference = mild.u.weights().dot((0.5 * u0 * u0).matrix());
  CHECK(std::abs(e.value - reference) <= 3 * e.standard_error);
}

TEST_CASE("frozen dt must divide the field spacing") {
  ParticleOptions o = options(10, 1);
  o.dt = 0.006;
  CHECK_THROWS_AS(simulate_frozen(zero_field(grid()), preset("heat"), o), ConfigError);
}

TEST_CASE("seed determinism across thread counts") {
  const ProblemSpec burgers = preset("burgers");
  const MildSolution mild = MildSolver(burgers, grid()).solve();
#ifdef _OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  const auto a = simulate_frozen(mild.u, burgers, options(4000, 17, {0.5, 1.0}));
#ifdef _OPENMP
  omp_set_num_threads(3);
#endif
  const auto b = simulate_frozen(mild.u, burgers, options(4000, 17, {0.5, 1.0}));
#ifdef _OPENMP
  omp_set_num_threads(saved);
#endif
  for (std::size_t r = 0; r < a.times.size(); ++r) {
    CHECK((a.positions[r].array() == b.positions[r].array()).all());
    CHECK((a.log_weights[r].array() == b.log_weights[r].array()).all());
  }
  const auto c = simulate_frozen(mild.u, burgers, options(4000, 18, {0.5, 1.0}));
  CHECK_FALSE((a.positions[1].array() == c.positions[1].array()).all());
}

TEST_CASE("KDE definition, scaling and mass") {
  const SpatialGrid space{1, 8.0, 512};
  ParticleEnsemble one;
  one.particles = 1;
  one.times = {0.0};
  one.positions = {Eigen::MatrixXd::Zero(1, 1)};
  one.log_weights = {Eigen::VectorXd::Zero(1)};
  const double h = 0.3;
  const DensityEstimate direct = density_estimate(one, 0.0, h, space, KdeMethod::direct);
  for (int j = 0; j < 512; j += 13) {
    const double x = space.coordinate(j);
    CHECK(direct.values[j] == doctest::Approx(std::exp(-x * x / (2 * h * h)) / std::sqrt(2 * std::numbers::pi * h * h)).epsilon(1e-13));
  }

  const auto ens = simulate_frozen(zero_field(grid()), preset("exponential_growth"), options(2000, 4, {0.5}));
  ParticleEnsemble unweighted = ens;
  unweighted.log_weights[0].setZero();
  const auto weighted = density_estimate(ens, 0.5, 0.2, space);
  const auto plain = density_estimate(unweighted, 0.5, 0.2, space);
  CHECK((weighted.values - std::exp(0.25) * plain.values).cwiseAbs().maxCoeff() <= 1e-12);
  const double mass = space.trapezoid_weights().dot(weighted.values);
  CHECK(mass == doctest::Approx(std::exp(0.25)).epsilon(1e-8));

  const auto binned = density_estimate(ens, 0.5, 0.2, space, KdeMethod::binned);
  CHECK(space.trapezoid_weights().dot(binned.values) == doctest::Approx(std::exp(0.25)).epsilon(1e-8));
  CHECK((binned.values - weighted.values).cwiseAbs().maxCoeff() <= 2e-3 * weighted.values.maxCoeff());
}

TEST_CASE("Silverman bandwidth uses the effective sample size") {
  ParticleEnsemble e;
  e.particles = 4;
  e.times = {0.0};
  Eigen::MatrixXd y(1, 4);
  y << -1, 1, -1, 1;
  e.positions = {y};
  e.log_weights = {Eigen::VectorXd::Zero(4)};
  CHECK(silverman_bandwidth(e, 0) == doctest::Approx(std::pow(4.0 / (3.0 * 4), 0.2)));
  e.log_weights[0] << 0, 0, -1000, -1000;  // two live particles
  CHECK(silverman_bandwidth(e, 0) == doctest::Approx(std::pow(4.0 / (3.0 * 2), 0.2)).epsilon(1e-9));
}

TEST_CASE("KDE error against the heat solution falls with N") {
  const SpatialGrid space{1, 8.0, 512};
  double previous = 1e9;
  for (int n : {1000, 10000, 100000}) {
    const auto ens = simulate_frozen(zero_field(grid()), preset("heat"), options(n, 21, {1.0}));
    const auto est = density_estimate(ens, 1.0, silverman_bandwidth(ens, 0), space, KdeMethod::binned);
    Eigen::VectorXd err(512);
    for (int j = 0; j < 512; ++j) err[j] = std::abs(est.values[j] - heat_oracle(0, 0.04, 1, 1, space.coordinate(j)));
    const double l1 = space.trapezoid_weights().dot(err);
    CHECK(l1 < previous);
    previous = l1;
  }
}

TEST_CASE("self-consistent mode") {
  SelfConsistentOptions o;
  o.particles = options(5000, 8, {0.5, 1.0});
  const auto heat = solve_selfconsistent(preset("heat"), grid(), o);
  const auto frozen = simulate_frozen(zero_field(grid()), preset("heat"), o.particles);
  CHECK((heat.ensemble.positions[1].array() == frozen.positions[1].array()).all());
  CHECK(heat.u.level(0) == preset("heat").initial.sample_on(grid().space));

  const auto growth = solve_selfconsistent(preset("exponential_growth"), grid(), o);
  const Estimate mass = weighted_functional(growth.ensemble, [](PointRef) { return 1.0; }, 1.0);
  CHECK(std::abs(mass.value - std::exp(0.5)) <= 3 * mass.standard_error + 1e-12);
  CHECK(growth.u.mass(64) == doctest::Approx(std::exp(0.5)).epsilon(1e-6));
}
