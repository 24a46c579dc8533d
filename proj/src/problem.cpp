#include "mfk/problem.hpp"

#include "mfk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mfk {

double InitialDensity::pdf(PointRef x) const {
  const double d = dimension();
  return std::exp(-(x - mean).squaredNorm() / (2.0 * variance)) /
         std::pow(2.0 * std::numbers::pi * variance, d / 2.0);
}

double InitialDensity::cdf(double x) const {
  if (dimension() != 1) throw std::invalid_argument("InitialDensity::cdf: one-dimensional densities only");
  return 0.5 * std::erfc(-(x - mean[0]) / std::sqrt(2.0 * variance));
}

double InitialDensity::sup_norm() const {
  return std::pow(2.0 * std::numbers::pi * variance, -dimension() / 2.0);
}

Eigen::VectorXd InitialDensity::sample_on(const SpatialGrid& grid) const {
  if (grid.dimension != dimension()) throw ConfigError("initial density: grid dimension mismatch");
  Eigen::VectorXd values(grid.size());
  Eigen::VectorXd x(grid.dimension);
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    grid.node(j, x);
    values[j] = pdf(x);
  }
  return values;
}

void InitialDensity::draw(std::uint64_t seed, std::uint64_t index, Eigen::Ref<Eigen::VectorXd> out) const {
  const CounterNormal normal(seed, index);
  const double sd = std::sqrt(variance);
  for (int a = 0; a < dimension(); ++a) out[a] = mean[a] + sd * normal(static_cast<std::uint64_t>(a));
}

Eigen::MatrixXd ProblemSpec::diffusion(double t) const {
  const Eigen::MatrixXd phi = dispersion(t);
  return phi * phi.transpose();
}

Kernel ProblemSpec::kernel() const {
  auto disp = dispersion;
  return Kernel(
      dimension, horizon,
      [disp](double t) {
        const Eigen::MatrixXd phi = disp(t);
        return Eigen::MatrixXd(phi * phi.transpose());
      },
      base_drift, time_homogeneous);
}

namespace {

double clamp_z(double z, double z_max) { return std::clamp(z, -z_max, z_max); }

}  // namespace

std::vector<std::string> preset_names() { return {"heat", "exponential_growth", "burgers", "logistic_fkpp"}; }

ProblemSpec preset(std::string_view name, const PresetParameters& params) {
  if (!(params.nu > 0.0)) throw ConfigError("preset: nu must be positive");
  if (!(params.u0_variance > 0.0)) throw ConfigError("preset: u0 variance must be positive");
  if (params.dimension < 1) throw ConfigError("preset: dimension must be >= 1");
  if (!(params.horizon > 0.0)) throw ConfigError("preset: horizon must be positive");

  ProblemSpec p;
  p.name = std::string(name);
  p.dimension = params.dimension;
  p.horizon = params.horizon;
  const int d = params.dimension;
  const double sqrt_nu = std::sqrt(params.nu);
  p.dispersion = [d, sqrt_nu](double) { return Eigen::MatrixXd(sqrt_nu * Eigen::MatrixXd::Identity(d, d)); };
  p.base_drift = [d](double) { return Eigen::VectorXd(Eigen::VectorXd::Zero(d)); };
  p.time_homogeneous = true;
  p.initial.mean = Eigen::VectorXd::Constant(d, params.u0_mean);
  p.initial.variance = params.u0_variance;
  p.interaction_drift = [](double, PointRef, double, Eigen::Ref<Eigen::VectorXd> out) { out.setZero(); };
  p.growth_rate = [](double, PointRef, double) { return 0.0; };

  const double c_u = p.kernel().bounds().C_u;
  const double z_max = params.z_max.value_or(2.0 * p.initial.sup_norm() * c_u);
  if (!(z_max > 0.0)) throw ConfigError("preset: z_max must be positive");
  p.constants.z_max = z_max;
  const double lambda = params.lambda;

  if (name == "heat") {
    // b = 0, Lambda = 0.
  } else if (name == "exponential_growth") {
    p.growth_rate = [lambda](double, PointRef, double) { return lambda; };
    p.constants.growth_bound = std::abs(lambda);
  } else if (name == "burgers") {
    if (d != 1) throw ConfigError("preset: burgers is one-dimensional");
    p.interaction_drift = [z_max](double, PointRef, double z, Eigen::Ref<Eigen::VectorXd> out) {
      out[0] = 0.5 * clamp_z(z, z_max);
    };
    p.constants.drift_bound = 0.5 * z_max;
    p.constants.drift_lipschitz = 0.5;
  } else if (name == "logistic_fkpp") {
    p.growth_rate = [lambda, z_max](double, PointRef, double z) { return lambda * (1.0 - clamp_z(z, z_max)); };
    p.constants.growth_bound = std::abs(lambda) * (1.0 + z_max);
    p.constants.growth_lipschitz = std::abs(lambda);
  } else {
    throw ConfigError("preset: unknown problem '" + std::string(name) +
                      "' (expected heat, exponential_growth, burgers or logistic_fkpp)");
  }
  return p;
}

TestFunction polynomial_gaussian(int degree, [[maybe_unused]] int dimension, double width, double center) {
  const double w2 = width * width;
  auto shifted = [center](PointRef x) { return Eigen::VectorXd(x.array() - center); };
  TestFunction f;
  f.name = "x^" + std::to_string(degree) + " exp(-|x|^2)";
  f.value = [=](PointRef x) {
    const Eigen::VectorXd y = shifted(x);
    return std::pow(y[0], degree) * std::exp(-y.squaredNorm() / w2);
  };
  f.gradient = [=](PointRef x) {
    const Eigen::VectorXd y = shifted(x);
    const double e = std::exp(-y.squaredNorm() / w2);
    const double poly = std::pow(y[0], degree);
    Eigen::VectorXd g = (-2.0 / w2) * poly * e * y;
    if (degree > 0) g[0] += degree * std::pow(y[0], degree - 1) * e;
    return g;
  };
  f.hessian = [=](PointRef x) {
    const Eigen::VectorXd y = shifted(x);
    const int n = static_cast<int>(y.size());
    const double e = std::exp(-y.squaredNorm() / w2);
    const double poly = std::pow(y[0], degree);
    const double dpoly = degree > 0 ? degree * std::pow(y[0], degree - 1) : 0.0;
    const double d2poly = degree > 1 ? degree * (degree - 1) * std::pow(y[0], degree - 2) : 0.0;
    const Eigen::VectorXd grad_e = (-2.0 / w2) * e * y;
    Eigen::MatrixXd hess_e = (4.0 / (w2 * w2)) * e * y * y.transpose();
    hess_e.diagonal().array() -= 2.0 / w2 * e;
    Eigen::MatrixXd h = poly * hess_e;
    h(0, 0) += d2poly * e;
    for (int j = 0; j < n; ++j) {
      h(0, j) += dpoly * grad_e[j];
      h(j, 0) += dpoly * grad_e[j];
    }
    return h;
  };
  return f;
}

std::vector<TestFunction> test_basket(int dimension) {
  std::vector<TestFunction> basket;
  for (int k = 0; k <= 4; ++k) basket.push_back(polynomial_gaussian(k, dimension));
  return basket;
}

double apply_generator(const ProblemSpec& problem, const TestFunction& phi, double t, PointRef x) {
  const Eigen::MatrixXd a = problem.diffusion(t);
  return 0.5 * (a.cwiseProduct(phi.hessian(x))).sum() + problem.base_drift(t).dot(phi.gradient(x));
}

double apply_generator_fd(const ProblemSpec& problem, const std::function<double(PointRef)>& phi, double t,
                          PointRef x, double h) {
  const int d = problem.dimension;
  const Eigen::MatrixXd a = problem.diffusion(t);
  const Eigen::VectorXd b0 = problem.base_drift(t);
  Eigen::VectorXd y = x;
  auto at = [&](int i, double di, int j, double dj) {
    y = x;
    y[i] += di;
    y[j] += dj;
    return phi(y);
  };
  const double center = phi(x);
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    const double plus = at(i, h, i, 0.0);
    const double minus = at(i, -h, i, 0.0);
    total += 0.5 * a(i, i) * (plus - 2.0 * center + minus) / (h * h);
    total += b0[i] * (plus - minus) / (2.0 * h);
    for (int j = i + 1; j < d; ++j) {
      const double mixed = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
      total += a(i, j) * mixed;  // a_ij and a_ji, each with weight 1/2
    }
  }
  return total;
}

bool ConstantCheck::ok() const {
  // Lipschitz quotients of exactly linear maps can exceed 1 by rounding.
  constexpr double limit = 1.0 + 1e-9;
  return drift_bound_ratio <= limit && growth_bound_ratio <= limit && drift_lipschitz_ratio <= limit &&
         growth_lipschitz_ratio <= limit;
}

ConstantCheck check_constants(const ProblemSpec& problem, int samples, std::uint64_t seed, double box) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = problem.dimension;
  const auto& c = problem.constants;
  auto ratio = [](double value, double bound) {
    if (value == 0.0) return 0.0;
    return bound > 0.0 ? value / bound : std::numeric_limits<double>::infinity();
  };
  ConstantCheck check;
  Eigen::VectorXd x(d), b1(d), b2(d);
  for (int n = 0; n < samples; ++n) {
    const double t = problem.horizon * unit(rng);
    for (int a = 0; a < d; ++a) x[a] = box * (2.0 * unit(rng) - 1.0);
    const double z1 = c.z_max * (2.0 * unit(rng) - 1.0);
    const double z2 = c.z_max * (2.0 * unit(rng) - 1.0);
    problem.interaction_drift(t, x, z1, b1);
    problem.interaction_drift(t, x, z2, b2);
    const double l1 = problem.growth_rate(t, x, z1);
    const double l2 = problem.growth_rate(t, x, z2);
    check.drift_bound_ratio = std::max(check.drift_bound_ratio, ratio(b1.norm(), c.drift_bound));
    check.growth_bound_ratio = std::max(check.growth_bound_ratio, ratio(std::abs(l1), c.growth_bound));
    const double dz = std::abs(z1 - z2);
    if (dz > 0.0) {
      check.drift_lipschitz_ratio =
          std::max(check.drift_lipschitz_ratio, ratio((b1 - b2).norm() / dz, c.drift_lipschitz));
      check.growth_lipschitz_ratio =
          std::max(check.growth_lipschitz_ratio, ratio(std::abs(l1 - l2) / dz, c.growth_lipschitz));
    }
  }
  return check;
}

}  // namespace mfk
