#pragma once

#include <Eigen/Core>

#include <cmath>

namespace mfk {

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int n);

/// n-point Gauss-Hermite rule for the standard normal weight:
/// E[f(Z)] ~ sum_i w_i f(z_i), Z ~ N(0, 1). Built by Golub-Welsch.
QuadratureRule gauss_hermite_normal(int n);

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
///
/// `f` may return any type closed under `+=` and scaling by double
/// (double, Eigen vectors, ...); `zero` seeds the accumulator.
template <typename F, typename T>
T composite_gauss_legendre(F&& f, double a, double b, int panels, int order, T zero) {
  const auto& rule = gauss_legendre(order);
  const double width = (b - a) / panels;
  T total = zero;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double half = 0.5 * width;
    for (int i = 0; i < order; ++i) total += (rule.weights[i] * half) * f(lo + half * (1.0 + rule.nodes[i]));
  }
  return total;
}

enum class SingularEnds { right, both };

/// Integrates g over [a, b] where g may carry an inverse square-root
/// singularity at b (and at a, for SingularEnds::both).
///
/// A singular end e is removed by s = e -/+ w^2, ds = 2w dw, so the
/// transformed integrand is bounded; the pieces are integrated by composite
/// Gauss-Legendre in w. With `both`, [a, b] is split at its midpoint.
template <typename F, typename T>
T sqrt_singular_integral(F&& g, double a, double b, SingularEnds ends, int panels, int order, T zero) {
  if (ends == SingularEnds::right) {
    const double wmax = std::sqrt(b - a);
    return composite_gauss_legendre([&](double w) { return (2.0 * w) * g(b - w * w); }, 0.0, wmax,
                                    panels, order, zero);
  }
  const double mid = 0.5 * (a + b);
  const double wmax = std::sqrt(mid - a);
  T left = composite_gauss_legendre([&](double w) { return (2.0 * w) * g(a + w * w); }, 0.0, wmax,
                                    panels, order, zero);
  T right = composite_gauss_legendre([&](double w) { return (2.0 * w) * g(b - w * w); }, 0.0, wmax,
                                     panels, order, zero);
  left += right;
  return left;
}

/// Trapezoid rule on uniform samples with spacing h.
inline double trapezoid(const Eigen::Ref<const Eigen::VectorXd>& samples, double h) {
  const auto n = samples.size();
  if (n < 2) return 0.0;
  return h * (samples.sum() - 0.5 * (samples[0] + samples[n - 1]));
}

}  // namespace mfk
