#include "mfk/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mfk;

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  for (int n : {1, 2, 5, 12, 16}) {
    const auto& rule = gauss_legendre(n);
    CHECK(rule.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
    for (int p = 0; p < 2 * n; ++p) {
      const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
      const double got = (rule.weights.array() * rule.nodes.array().pow(p)).sum();
      CHECK(got == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("Gauss-Hermite rule reproduces normal moments") {
  const QuadratureRule rule = gauss_hermite_normal(40);
  double moment = 1.0;  // (p - 1)!!
  for (int p = 0; p <= 20; p += 2) {
    if (p > 0) moment *= p - 1;
    const double got = (rule.weights.array() * rule.nodes.array().pow(p)).sum();
    CHECK(got == doctest::Approx(moment).epsilon(1e-10));
  }
  const QuadratureRule big = gauss_hermite_normal(200);
  CHECK(big.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  // E[cos Z] = e^{-1/2}
  CHECK((big.weights.array() * big.nodes.array().cos()).sum() == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("Beta identity by the square-root substitution") {
  for (double delta : {0.01, 0.1, 1.0}) {
    const double got = sqrt_singular_integral(
        [delta](double w) { return 1.0 / std::sqrt((delta - w) * w); }, 0.0, delta, SingularEnds::both, 4, 12, 0.0);
    CHECK(std::abs(got - std::numbers::pi) <= 1e-6);
  }
}

TEST_CASE("right-singular integral of s^(-1/2) kernels") {
  // int_0^1 cos(s) / sqrt(1 - s) ds against a fine composite reference in w.
  const double got = sqrt_singular_integral([](double s) { return std::cos(s) / std::sqrt(1.0 - s); }, 0.0, 1.0,
                                            SingularEnds::right, 2, 12, 0.0);
  const double reference = composite_gauss_legendre([](double w) { return 2.0 * std::cos(1.0 - w * w); }, 0.0, 1.0,
                                                    64, 16, 0.0);
  CHECK(got == doctest::Approx(reference).epsilon(1e-13));
}

TEST_CASE("trapezoid") {
  Eigen::VectorXd f(3);
  f << 1, 2, 3;
  CHECK(trapezoid(f, 0.5) == doctest::Approx(2.0));
}
