#pragma once

#include "mfk/kernel.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfk {

using PointRef = const Eigen::Ref<const Eigen::VectorXd>&;

/// Lambda(t, x, z).
using ScalarCoefficient = std::function<double(double t, PointRef x, double z)>;
/// b(t, x, z), written into `out` (length d).
using VectorCoefficient = std::function<void(double t, PointRef x, double z, Eigen::Ref<Eigen::VectorXd> out)>;

/// Isotropic Gaussian initial density N(mean, variance I).
struct InitialDensity {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(1);
  double variance = 0.04;

  int dimension() const { return static_cast<int>(mean.size()); }
  double pdf(PointRef x) const;
  /// Cumulative distribution function; one-dimensional densities only.
  double cdf(double x) const;
  double sup_norm() const;
  /// Values on every node of `grid`.
  Eigen::VectorXd sample_on(const SpatialGrid& grid) const;
  /// Deterministic draw for particle `index` under `seed`.
  void draw(std::uint64_t seed, std::uint64_t index, Eigen::Ref<Eigen::VectorXd> out) const;
};

/// Declared bounds and Lipschitz constants of b and Lambda in z.
struct ProblemConstants {
  double drift_bound = 0.0;        // M_b
  double growth_bound = 0.0;       // M_Lambda
  double drift_lipschitz = 0.0;    // L_b
  double growth_lipschitz = 0.0;   // L_Lambda
  double z_max = 0.0;              // half-width of the z evaluation range
};

/// One McKean-Feynman-Kac instance: the PDE
///   d_t u = L_t^* u - div(b(t, x, u) u) + Lambda(t, x, u) u,  u(0) = u0,
/// with a = Phi Phi^T and b0 independent of x.
struct ProblemSpec {
  std::string name;
  int dimension = 1;
  double horizon = 1.0;
  std::function<Eigen::MatrixXd(double)> dispersion;  // Phi(t)
  std::function<Eigen::VectorXd(double)> base_drift;  // b0(t)
  bool time_homogeneous = true;
  VectorCoefficient interaction_drift;  // b
  ScalarCoefficient growth_rate;        // Lambda
  InitialDensity initial;
  ProblemConstants constants;

  Eigen::MatrixXd diffusion(double t) const;
  Kernel kernel() const;
  /// Ellipticity constant of a over [0, T].
  double ellipticity() const { return kernel().ellipticity(); }
  bool has_drift() const { return constants.drift_bound > 0.0; }
  bool has_growth() const { return constants.growth_bound > 0.0; }
};

struct PresetParameters {
  double nu = 1.0;
  double lambda = 0.5;
  double u0_mean = 0.0;
  double u0_variance = 0.04;
  std::optional<double> z_max;
  int dimension = 1;
  double horizon = 1.0;
};

/// heat, exponential_growth, burgers, logistic_fkpp. Throws ConfigError on an
/// unknown name.
ProblemSpec preset(std::string_view name, const PresetParameters& params = {});
std::vector<std::string> preset_names();

/// Smooth test function with analytic first and second derivatives.
struct TestFunction {
  std::string name;
  std::function<double(PointRef)> value;
  std::function<Eigen::VectorXd(PointRef)> gradient;
  std::function<Eigen::MatrixXd(PointRef)> hessian;
};

/// x1^k exp(-|x - c|^2 / w^2) in the first coordinate's polynomial factor.
TestFunction polynomial_gaussian(int degree, int dimension = 1, double width = 1.0, double center = 0.0);
/// Five-function basket x^k exp(-x^2), k = 0..4, used by residual and
/// representation checks.
std::vector<TestFunction> test_basket(int dimension = 1);

/// (1/2) sum a_ij d_ij phi + sum b0_j d_j phi, with analytic derivatives.
double apply_generator(const ProblemSpec& problem, const TestFunction& phi, double t, PointRef x);
/// Same operator with centred finite differences of width h.
double apply_generator_fd(const ProblemSpec& problem, const std::function<double(PointRef)>& phi, double t,
                          PointRef x, double h);

/// Worst observed |b| / M_b, |Lambda| / M_Lambda and Lipschitz quotients over
/// random (t, x, z1, z2) with z in [-z_max, z_max]; all must stay <= 1.
struct ConstantCheck {
  double drift_bound_ratio = 0.0;
  double growth_bound_ratio = 0.0;
  double drift_lipschitz_ratio = 0.0;
  double growth_lipschitz_ratio = 0.0;
  bool ok() const;
};
ConstantCheck check_constants(const ProblemSpec& problem, int samples, std::uint64_t seed, double box = 8.0);

}  // namespace mfk
