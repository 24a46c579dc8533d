// Acceptance battery: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include "mfk/harness.hpp"
#include "mfk/mild_solver.hpp"
#include "mfk/oracles.hpp"
#include "mfk/particle_solver.hpp"
#include "mfk/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>

using namespace mfk;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s [%2d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

constexpr double kTol = 1e-6;

GridSpec grid(int steps = 64, double slab = 0.0) { return {SpatialGrid{1, 8.0, 512}, 1.0, steps, slab}; }

Field heat_field(const Field& like, double lambda) {
  Field f(like.space(), like.times());
  for (int k = 0; k < f.levels(); ++k)
    for (int j = 0; j < f.space().nodes_per_axis; ++j)
      f.values()(k, j) = exp_mass_oracle(lambda, f.times()[k]) *
                         heat_oracle(0, 0.04, 1, f.times()[k], f.space().coordinate(j));
  return f;
}

void heat_exactness() {
  const auto start = Clock::now();
  const MildSolution sol = MildSolver(preset("heat"), grid()).solve();
  const double l1 = compare_fields(sol.u, heat_field(sol.u, 0)).max_l1();
  const double t = seconds_since(start);
  report(1, "heat exactness", sol.report.converged && l1 <= 1e-3 && t <= 30,
         "max per-time L1 " + fmt("%.3e", l1) + " (<= 1e-3), " + fmt("%.2f s", t) + " (<= 30 s)");
}

void mass_laws() {
  double worst0 = 0;
  for (const char* name : {"heat", "burgers"}) {
    const MildSolution sol = MildSolver(preset(name), grid(64, 0.25)).solve();
    for (int k = 0; k < sol.u.levels(); ++k) worst0 = std::max(worst0, std::abs(sol.u.mass(k) - 1));
  }
  const MildSolution growth = MildSolver(preset("exponential_growth"), grid()).solve();
  const double err = std::abs(growth.u.mass(64) - exp_mass_oracle(0.5, 1));
  report(2, "mass laws", worst0 <= 1e-3 && err <= 1e-3,
         "Lambda=0 worst |mass-1| " + fmt("%.3e", worst0) + ", Lambda=0.5 |mass(1)-e^0.5| " + fmt("%.3e", err) +
             " (<= 1e-3)");
}

struct BurgersRun {
  ProblemSpec problem = preset("burgers");
  MildSolver solver{preset("burgers"), grid(64, 0.25)};
  MildSolution sol;
};

void burgers_cross_validation(BurgersRun& b) {
  const auto start = Clock::now();
  b.sol = b.solver.solve();
  const Field fd = burgers_fd_reference(b.problem.initial, 1.0, b.solver.grid());
  const ComparisonReport r = compare_fields(b.sol.u, fd);
  double worst = 0;
  std::ostringstream detail;
  for (double t : {0.25, 0.5, 1.0}) {
    const double l1 = r.l1[b.sol.u.level_at(t)];
    worst = std::max(worst, l1);
    detail << "t=" << t << " L1 " << fmt("%.3e", l1) << ", ";
  }
  const double secs = seconds_since(start);
  detail << fmt("%.2f s", secs) << " (tol 1e-2, <= 300 s)";
  report(3, "Burgers vs finite-volume reference", b.sol.report.converged && worst <= 1e-2 && secs <= 300,
         detail.str());
}

void uniqueness(const BurgersRun& b) {
  const int m = b.solver.grid().steps_per_slab();
  double worst = 0;
  bool converged = true;
  for (int slab = 0; slab < b.solver.grid().slab_count(); ++slab) {
    const Eigen::VectorXd phi = b.sol.u.level(slab * m);
    const auto zero = b.solver.solve_slab(slab, phi);
    // Perturbed start: a scaled copy of u0_hat plus an odd bump.
    Field guess = zero.state.u0_hat;
    for (int k = 0; k < guess.levels(); ++k)
      for (int j = 0; j < guess.space().nodes_per_axis; ++j) {
        const double x = guess.space().coordinate(j);
        guess.values()(k, j) = 0.5 * guess.values()(k, j) + 0.2 * x * std::exp(-x * x);
      }
    const auto perturbed = b.solver.solve_slab(slab, phi, &guess);
    converged = converged && zero.stats.converged && perturbed.stats.converged;
    worst = std::max(worst, global_l1_distance(zero.u, perturbed.u));
  }
  report(4, "fixed-point uniqueness", converged && worst <= 2 * kTol,
         "max slab L1 distance " + fmt("%.3e", worst) + " (<= 2 tol = 2e-6)");
}

void slab_gluing(const BurgersRun& b) {
  const MildSolution half = MildSolver(b.problem, grid(64, 0.125)).solve();
  const double d = global_l1_distance(b.sol.u, half.u);
  report(5, "slab gluing", half.report.converged && d <= 2 * kTol,
         "global L1 distance tau=0.25 vs 0.125: " + fmt("%.3e", d) + " (<= 2e-6)");
}

void ball_preservation(const BurgersRun& b) {
  const auto& r = b.sol.report;
  report(6, "ball preservation", r.ball_preserved(),
         "max iterate L1 " + fmt("%.4f", r.max_iterate_l1) + ", sup " + fmt("%.4f", r.max_iterate_sup) +
             ", M " + fmt("%.4f", r.ball));
}

void kernel_suite() {
  double norm = 0, ck = 0, ratio = 0;
  const SpatialGrid box{1, 8.0, 2049};
  const Eigen::VectorXd w = box.trapezoid_weights();
  Eigen::VectorXd x0(1), x(1), y(1);
  for (const auto& name : preset_names()) {
    const Kernel k = preset(name).kernel();
    for (double s : {0.0, 0.3})
      for (double t : {0.35, 0.6, 1.0})
        for (double c : {-1.0, 0.0, 0.5}) {
          x0[0] = c;
          double mass = 0;
          for (int j = 0; j < box.nodes_per_axis; ++j) {
            x[0] = box.coordinate(j);
            mass += w[j] * k.eval_p(s, x0, t, x);
          }
          norm = std::max(norm, std::abs(mass - 1));
        }
    x0[0] = 0.1;
    y[0] = -0.4;
    for (double s : {0.0, 0.1, 0.2})
      for (double t : {0.3, 0.45, 0.6})
        for (double r : {0.7, 0.85, 1.0}) ck = std::max(ck, k.chapman_kolmogorov_residual(s, t, r, x0, y, 256));
    const auto v = k.verify_bounds(10000, 2024);
    ratio = std::max({ratio, v.p, v.grad});
  }
  const Kernel varying(1, 1.0, [](double t) { return Eigen::MatrixXd::Constant(1, 1, 1 + t); },
                       [](double t) { return Eigen::VectorXd::Constant(1, 0.5 * t); }, false);
  for (double s : {0.0, 0.1, 0.2})
    for (double t : {0.3, 0.45, 0.6})
      for (double r : {0.7, 0.85, 1.0}) ck = std::max(ck, varying.chapman_kolmogorov_residual(s, t, r, x0, y, 256));
  const auto v = varying.verify_bounds(10000, 99);
  ratio = std::max({ratio, v.p, v.grad});
  double beta = 0;
  for (double delta : {0.01, 0.1, 1.0}) {
    const double got = sqrt_singular_integral([delta](double u) { return 1 / std::sqrt((delta - u) * u); }, 0.0, delta,
                                              SingularEnds::both, 4, 12, 0.0);
    beta = std::max(beta, std::abs(got - std::numbers::pi));
  }
  report(7, "kernel suite", norm <= 1e-8 && ck <= 1e-7 && ratio <= 1 && beta <= 1e-6,
         "normalization " + fmt("%.2e", norm) + ", CK " + fmt("%.2e", ck) + ", worst bound ratio " +
             fmt("%.4f", ratio) + ", Beta " + fmt("%.2e", beta));
}

void representation(const BurgersRun& b) {
  const auto start = Clock::now();
  // Field resolved at the particle step, so the frozen lookup adds no lag.
  const MildSolution fine = MildSolver(b.problem, grid(256, 0.25)).solve();
  const auto basket = test_basket();
  const std::vector<double> times{0.25, 0.5, 1.0};
  std::vector<double> refs;
  Eigen::VectorXd phi(512), x(1);
  for (double t : times)
    for (const auto& f : basket) {
      for (int j = 0; j < 512; ++j) {
        x[0] = fine.u.space().coordinate(j);
        phi[j] = f.value(x);
      }
      refs.push_back(fine.u.weights().dot(phi.cwiseProduct(fine.u.level(fine.u.level_at(t)))));
    }
  int pass = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ParticleOptions o;
    o.particles = 100000;
    o.dt = 1.0 / 256;
    o.seed = seed;
    o.record_times = times;
    const ParticleEnsemble ens = simulate_frozen(fine.u, b.problem, o);
    int i = 0;
    for (double t : times)
      for (const auto& f : basket) {
        const Estimate e = weighted_functional(ens, f.value, t);
        ++total;
        if (std::abs(e.value - refs[i++]) <= 3 * e.standard_error) ++pass;
      }
  }
  const double frac = static_cast<double>(pass) / total;
  const double secs = seconds_since(start);
  report(8, "representation, frozen mode", frac >= 0.95 && secs <= 600,
         std::to_string(pass) + "/" + std::to_string(total) + " within 3 SE (>= 95%), " + fmt("%.1f s", secs) +
             " (<= 600 s)");
}

void linearized(const BurgersRun& b) {
  const MildSolution lin =
      b.solver.solve_linearized(b.solver.freeze_drift(b.sol.u), b.solver.freeze_growth(b.sol.u), b.sol.u.level(0));
  const double d = global_l1_distance(lin.u, b.sol.u);
  report(9, "linearized uniqueness", lin.report.converged && d <= 2 * kTol,
         "global L1 distance " + fmt("%.3e", d) + " (<= 2e-6)");
}

void weak_mild(const BurgersRun& b) {
  Field bumped = b.sol.u;
  for (int k = 1; k < bumped.levels(); ++k)
    for (int j = 0; j < bumped.space().nodes_per_axis; ++j) {
      const double x = bumped.space().coordinate(j);
      bumped.values()(k, j) += 0.1 * std::exp(-x * x);
    }
  double worst = 0, weakest_inflation = 1e300;
  for (double t : {0.25, 0.5, 1.0}) {
    double base = 0, perturbed = 0;
    for (const auto& phi : test_basket()) {
      const double r = weak_residual(b.sol.u, phi, t, b.problem);
      worst = std::max(worst, r);
      base = std::max(base, r);
      perturbed = std::max(perturbed, weak_residual(bumped, phi, t, b.problem));
    }
    weakest_inflation = std::min(weakest_inflation, perturbed / base);
  }
  report(10, "weak-mild equivalence", worst <= 5e-3 && weakest_inflation >= 10,
         "max residual " + fmt("%.3e", worst) + " (<= 5e-3), bump inflation >= " + fmt("%.1fx", weakest_inflation) +
             " (>= 10x)");
}

void mckean_trend(const BurgersRun& b) {
  std::vector<double> medians;
  for (int n : {1000, 10000, 100000}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SelfConsistentOptions o;
      o.particles.particles = n;
      o.particles.dt = 1.0 / 256;
      o.particles.seed = seed;
      o.particles.record_times = {1.0};
      const SelfConsistentResult r = solve_selfconsistent(b.problem, b.solver.grid(), o);
      errors.push_back(compare_fields(r.u, b.sol.u).l1.back());
    }
    std::sort(errors.begin(), errors.end());
    medians.push_back(errors[2]);
  }
  const bool monotone = medians[1] <= medians[0] && medians[2] <= medians[1];
  report(11, "McKean self-consistency trend", monotone,
         "median L1 at T: N=1e3 " + fmt("%.4f", medians[0]) + ", 1e4 " + fmt("%.4f", medians[1]) + ", 1e5 " +
             fmt("%.4f", medians[2]));
}

}  // namespace

int main() {
  heat_exactness();
  mass_laws();
  BurgersRun burgers;
  burgers_cross_validation(burgers);
  uniqueness(burgers);
  slab_gluing(burgers);
  ball_preservation(burgers);
  kernel_suite();
  representation(burgers);
  linearized(burgers);
  weak_mild(burgers);
  mckean_trend(burgers);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
