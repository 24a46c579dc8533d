#include "mfk/kernel.hpp"
#include "mfk/problem.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mfk;

namespace {

Eigen::VectorXd pt(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

double normal_pdf(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var); }

Kernel unit_kernel(double a = 1.0, double b0 = 0.0, double horizon = 1.0) {
  return Kernel::constant(Eigen::MatrixXd::Constant(1, 1, a), Eigen::VectorXd::Constant(1, b0), horizon);
}

}  // namespace

TEST_CASE("eval_p closed-form values") {
  CHECK(unit_kernel().eval_p(0, pt({0}), 1, pt({0})) == doctest::Approx(1 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-14));
  CHECK(unit_kernel(1, 1).eval_p(0, pt({0}), 1, pt({1})) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
  const Kernel k2 = Kernel::constant(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), 1.0);
  CHECK(k2.eval_p(0, pt({0, 0}), 0.5, pt({0, 0})) == doctest::Approx(1 / std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("eval_p rejects bad times and covariances") {
  const Kernel k = unit_kernel();
  CHECK_THROWS_AS(k.eval_p(0.5, pt({0}), 0.5, pt({0})), std::invalid_argument);
  CHECK_THROWS_AS(k.eval_p(0.7, pt({0}), 0.5, pt({0})), std::invalid_argument);
  CHECK_THROWS_AS(unit_kernel(-1.0), std::invalid_argument);
}

TEST_CASE("eval_grad_p matches the analytic derivative and finite differences") {
  const Kernel k = unit_kernel();
  CHECK(k.eval_grad_p(0, pt({0}), 1, pt({0}))[0] == 0.0);
  CHECK(k.eval_grad_p(0, pt({0}), 1, pt({1}))[0] == doctest::Approx(normal_pdf(1, 1)).epsilon(1e-13));
  const double h = 1e-6;
  const double fd = (k.eval_p(0, pt({h}), 0.01, pt({0.2})) - k.eval_p(0, pt({-h}), 0.01, pt({0.2}))) / (2 * h);
  CHECK(k.eval_grad_p(0, pt({0}), 0.01, pt({0.2}))[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("normalization and gradient integral over the box") {
  const Kernel k = unit_kernel(1.0, 0.3);
  const SpatialGrid grid{1, 8.0, 2001};
  const Eigen::VectorXd w = grid.trapezoid_weights();
  for (double dt : {0.05, 0.3, 1.0}) {
    double mass = 0, grad = 0;
    for (int j = 0; j < grid.nodes_per_axis; ++j) {
      mass += w[j] * k.eval_p(0, pt({0.1}), dt, pt({grid.coordinate(j)}));
      grad += w[j] * k.eval_grad_p(0, pt({0.1}), dt, pt({grid.coordinate(j)}))[0];
    }
    CHECK(std::abs(mass - 1) <= 1e-8);
    CHECK(std::abs(grad) <= 1e-8);
  }
}

TEST_CASE("derived constants for a = 1 agree with a brute-force maximization") {
  const Kernel k = unit_kernel();
  CHECK(k.bounds().c_u == doctest::Approx(0.25));
  // sup over the radius of p / q and |dp| sqrt(dt) / q for unit time.
  double sup_p = 0, sup_g = 0;
  for (int i = 0; i <= 200000; ++i) {
    const double r = 20.0 * i / 200000;
    const double p = normal_pdf(r, 1.0);
    const double q = normal_pdf(r, 2.0);  // variance dt / (2 c_u)
    sup_p = std::max(sup_p, p / q);
    sup_g = std::max(sup_g, r * p / q);
  }
  CHECK(k.bounds().C_u == doctest::Approx(std::max(sup_p, sup_g)).epsilon(1e-6));
}

TEST_CASE("verify_bounds passes for every preset kernel") {
  for (const auto& name : preset_names()) {
    const Kernel k = preset(name).kernel();
    const auto r = k.verify_bounds(10000, 7);
    CHECK(r.p <= 1.0);
    CHECK(r.grad <= 1.0);
  }
  const Kernel drifted = unit_kernel(2.0, 1.5, 2.0);
  const auto r = drifted.verify_bounds(10000, 11);
  CHECK(r.p <= 1.0);
  CHECK(r.grad <= 1.0);
}

TEST_CASE("degenerate sample at the mode has zero gradient ratio") {
  const Kernel k = unit_kernel();
  CHECK(k.bound_ratios(0, pt({0}), 1, pt({0})).grad == 0.0);
}

TEST_CASE("stale constants fail after scaling a by 4; re-derived constants pass") {
  Kernel scaled = unit_kernel(4.0);
  const auto fresh = scaled.verify_bounds(10000, 3);
  CHECK(fresh.p <= 1.0);
  CHECK(fresh.grad <= 1.0);
  scaled.set_bounds(unit_kernel(1.0).bounds());
  const auto stale = scaled.verify_bounds(10000, 3);
  CHECK(std::max(stale.p, stale.grad) > 1.0);
}

TEST_CASE("Chapman-Kolmogorov composition") {
  const Kernel k = unit_kernel();
  CHECK(k.chapman_kolmogorov_residual(0, 0.5, 1, pt({0}), pt({0}), 256) <= 1e-8);
  CHECK(k.chapman_kolmogorov_residual(0, 0.5, 1, pt({0}), pt({2}), 256) <= 1e-8);
  const Kernel varying(1, 1.0, [](double t) { return Eigen::MatrixXd::Constant(1, 1, 1 + t); },
                       [](double) { return Eigen::VectorXd::Zero(1); }, false);
  CHECK(varying.covariance(0, 0.9)(0, 0) == doctest::Approx(0.9 + 0.405).epsilon(1e-14));
  CHECK(varying.chapman_kolmogorov_residual(0, 0.3, 0.9, pt({0}), pt({0.4}), 256) <= 1e-7);
  CHECK_THROWS_AS(k.chapman_kolmogorov_residual(0, 0.5, 0.5, pt({0}), pt({0}), 64), std::invalid_argument);
}

TEST_CASE("Chapman-Kolmogorov on a 3x3x3 time grid for the presets") {
  for (const auto& name : preset_names()) {
    const Kernel k = preset(name).kernel();
    for (double s : {0.0, 0.1, 0.2})
      for (double t : {0.3, 0.45, 0.6})
        for (double r : {0.7, 0.85, 1.0}) CHECK(k.chapman_kolmogorov_residual(s, t, r, pt({0.2}), pt({-0.5}), 256) <= 1e-7);
  }
}

TEST_CASE("convolve_initial evolves a Gaussian and keeps mass") {
  const SpatialGrid grid{1, 8.0, 512};
  const Kernel k = unit_kernel();
  Eigen::VectorXd phi(grid.size());
  for (int j = 0; j < grid.nodes_per_axis; ++j) phi[j] = normal_pdf(grid.coordinate(j), 0.04);
  const Eigen::VectorXd out = k.convolve_initial(grid, phi, 0, 1);
  const int mid = grid.nodes_per_axis / 2;
  double worst = 0;
  for (int j = 0; j < grid.nodes_per_axis; ++j) worst = std::max(worst, std::abs(out[j] - normal_pdf(grid.coordinate(j), 1.04)));
  CHECK(worst <= 1e-9);
  CHECK(std::abs(out[mid] - normal_pdf(grid.coordinate(mid), 1.04)) <= 1e-9);
  CHECK(normal_pdf(0, 1.04) == doctest::Approx(0.391195).epsilon(1e-6));

  Eigen::VectorXd box(grid.size());
  for (int j = 0; j < grid.nodes_per_axis; ++j) box[j] = std::abs(grid.coordinate(j)) <= 1 ? 1.0 : 0.0;
  box /= grid.trapezoid_weights().dot(box);
  const Eigen::VectorXd smoothed = k.convolve_initial(grid, box, 0.2, 0.7);
  CHECK(grid.trapezoid_weights().dot(smoothed) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(smoothed.maxCoeff() <= k.bounds().C_u * box.maxCoeff());
  CHECK_THROWS_AS(k.convolve_initial(grid, phi, 1, 1), std::invalid_argument);
}
