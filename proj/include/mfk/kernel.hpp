#pragma once

#include "mfk/grid.hpp"
#include "mfk/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>

namespace mfk {

/// Fundamental solution of the linear Fokker-Planck equation for
/// space-independent coefficients a(t), b0(t).
///
/// p(s, x0, t, .) is the Gaussian density with mean x0 + int_s^t b0 and
/// covariance int_s^t a. The pair (C_u, c_u) is derived at construction so
/// that p <= C_u q and |d_x0 p| <= C_u q / sqrt(t - s), where q is the
/// centred Gaussian with variance (t - s) / (2 c_u) per axis.
template <typename Scalar>
class GaussianKernel {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using DiffusionFn = std::function<Matrix(Scalar)>;
  using DriftFn = std::function<Vector(Scalar)>;

  struct Bounds {
    Scalar C_u;
    Scalar c_u;
  };

  /// Observed ratios p / (C_u q) and |grad p| sqrt(t - s) / (C_u q).
  struct Ratios {
    Scalar p = 0;
    Scalar grad = 0;
  };

  GaussianKernel(int dimension, Scalar horizon, DiffusionFn diffusion, DriftFn drift, bool time_homogeneous)
      : dimension_(dimension),
        horizon_(horizon),
        diffusion_(std::move(diffusion)),
        drift_(std::move(drift)),
        homogeneous_(time_homogeneous) {
    if (dimension_ < 1) throw std::invalid_argument("kernel: dimension must be >= 1");
    if (!(horizon_ > 0)) throw std::invalid_argument("kernel: horizon must be positive");
    scan_coefficients();
    bounds_ = derive_bounds(dimension_, ellipticity_, max_diffusion_, drift_bound_, horizon_,
                            Scalar(1) / (4 * max_diffusion_));
  }

  static GaussianKernel constant(const Matrix& a, const Vector& b0, Scalar horizon) {
    return GaussianKernel(static_cast<int>(a.rows()), horizon, [a](Scalar) { return a; },
                          [b0](Scalar) { return b0; }, true);
  }

  /// Closed-form witnesses for the Gaussian bounds given ellipticity mu,
  /// largest eigenvalue lambda_max of a, drift bound B and a trial c_u.
  static Bounds derive_bounds(int d, Scalar mu, Scalar lambda_max, Scalar drift_bound, Scalar horizon,
                              Scalar c_u) {
    const Scalar alpha = Scalar(1) / (2 * lambda_max);
    if (!(c_u > 0 && c_u < alpha))
      throw std::invalid_argument("kernel: c_u must lie in (0, 1/(2 lambda_max))");
    const Scalar prefactor = std::pow(Scalar(1) / (2 * mu * c_u), Scalar(d) / 2);
    const Scalar b2t = drift_bound * drift_bound * horizon;
    // sup_y exp((-alpha |y - m|^2 + c |y|^2) / dt) with |m| <= B dt.
    const Scalar c_p = prefactor * std::exp(alpha * c_u * b2t / (alpha - c_u));
    Scalar beta = alpha - c_u;
    Scalar shift = 1;
    if (drift_bound > 0) {
      const Scalar eps = (alpha - c_u) / (2 * c_u);
      beta = (alpha - c_u) / 2;
      shift = std::exp(c_u * (1 + 1 / eps) * b2t);
    }
    // sup_r r exp(-beta r^2) = 1 / sqrt(2 e beta).
    const Scalar c_g = prefactor / mu / std::sqrt(2 * std::numbers::e_v<Scalar> * beta) * shift;
    return {std::max(c_p, c_g), c_u};
  }

  int dimension() const { return dimension_; }
  Scalar horizon() const { return horizon_; }
  bool time_homogeneous() const { return homogeneous_; }
  /// Smallest eigenvalue of a(t) over [0, T] (the ellipticity constant).
  Scalar ellipticity() const { return ellipticity_; }
  Scalar max_diffusion() const { return max_diffusion_; }
  Scalar drift_bound() const { return drift_bound_; }
  const Bounds& bounds() const { return bounds_; }
  void set_bounds(Bounds b) { bounds_ = b; }

  Matrix diffusion(Scalar t) const { return diffusion_(t); }
  Vector drift(Scalar t) const { return drift_(t); }

  Matrix covariance(Scalar s, Scalar t) const {
    if (homogeneous_) return (t - s) * diffusion_(s);
    return integrate_in_time(s, t, Matrix(Matrix::Zero(dimension_, dimension_)), diffusion_);
  }

  Vector mean_shift(Scalar s, Scalar t) const {
    if (homogeneous_) return (t - s) * drift_(s);
    return integrate_in_time(s, t, Vector(Vector::Zero(dimension_)), drift_);
  }

  Scalar eval_p(Scalar s, const Eigen::Ref<const Vector>& x0, Scalar t, const Eigen::Ref<const Vector>& x) const {
    return transition(s, t).density(x - x0);
  }

  /// Gradient of p with respect to x0: Sigma^{-1} (x - x0 - m) p.
  Vector eval_grad_p(Scalar s, const Eigen::Ref<const Vector>& x0, Scalar t,
                     const Eigen::Ref<const Vector>& x) const {
    const auto tr = transition(s, t);
    const Vector y = x - x0 - tr.mean;
    return tr.chol.solve(y) * tr.density(x - x0);
  }

  Scalar eval_q(Scalar s, const Eigen::Ref<const Vector>& x0, Scalar t, const Eigen::Ref<const Vector>& x) const {
    check_times(s, t);
    const Scalar dt = t - s;
    const Scalar c = bounds_.c_u;
    return std::pow(c / (std::numbers::pi_v<Scalar> * dt), Scalar(dimension_) / 2) *
           std::exp(-c * (x - x0).squaredNorm() / dt);
  }

  Ratios bound_ratios(Scalar s, const Eigen::Ref<const Vector>& x0, Scalar t,
                      const Eigen::Ref<const Vector>& x) const {
    const Scalar cq = bounds_.C_u * eval_q(s, x0, t, x);
    const Scalar p = eval_p(s, x0, t, x);
    const Scalar g = eval_grad_p(s, x0, t, x).norm() * std::sqrt(t - s);
    if (cq == 0) return {p > 0 ? std::numeric_limits<Scalar>::infinity() : 0,
                         g > 0 ? std::numeric_limits<Scalar>::infinity() : 0};
    return {p / cq, g / cq};
  }

  /// Worst ratios over random (s, x0, t, x); both must stay <= 1.
  ///
  /// Half the samples put x within six standard deviations of the kernel
  /// mode, the rest anywhere in [-box, box]^d around x0.
  Ratios verify_bounds(int sample_count, std::uint64_t seed, Scalar box = 4) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Ratios worst;
    Vector x0(dimension_), x(dimension_);
    for (int n = 0; n < sample_count; ++n) {
      Scalar s = horizon_ * unit(rng);
      Scalar t = horizon_ * unit(rng);
      if (s > t) std::swap(s, t);
      if (t - s < Scalar(1e-12)) continue;
      for (int a = 0; a < dimension_; ++a) x0[a] = box * (2 * unit(rng) - 1);
      if (n % 2 == 0) {
        const Vector m = mean_shift(s, t);
        const Scalar sd = std::sqrt(max_diffusion_ * (t - s));
        for (int a = 0; a < dimension_; ++a) x[a] = x0[a] + m[a] + 6 * sd * (2 * unit(rng) - 1);
      } else {
        for (int a = 0; a < dimension_; ++a) x[a] = x0[a] + box * (2 * unit(rng) - 1);
      }
      const Ratios r = bound_ratios(s, x0, t, x);
      worst.p = std::max(worst.p, r.p);
      worst.grad = std::max(worst.grad, r.grad);
    }
    return worst;
  }

  /// |p(s,x0,r,y) - int p(s,x0,t,x) p(t,x,r,y) dx| with a trapezoid rule of
  /// `quad_nodes` points per axis over [-box, box]^d.
  Scalar chapman_kolmogorov_residual(Scalar s, Scalar t, Scalar r, const Eigen::Ref<const Vector>& x0,
                                     const Eigen::Ref<const Vector>& y, int quad_nodes, Scalar box = 8) const {
    if (!(s < t && t < r)) throw std::invalid_argument("kernel: Chapman-Kolmogorov needs s < t < r");
    const SpatialGrid grid{dimension_, static_cast<double>(box), quad_nodes};
    const auto first = transition(s, t);
    const auto second = transition(t, r);
    const Eigen::VectorXd w = grid.trapezoid_weights();
    Eigen::VectorXd node(dimension_);
    Scalar integral = 0;
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      grid.node(j, node);
      const Vector x = node.cast<Scalar>();
      integral += Scalar(w[j]) * first.density(x - x0) * second.density(y - x);
    }
    return std::abs(transition(s, r).density(y - x0) - integral);
  }

  /// Trapezoid evaluation of int p(r, x0, t, x) phi(x0) dx0 at every node.
  Vector convolve_initial(const SpatialGrid& grid, const Eigen::Ref<const Vector>& phi, Scalar r, Scalar t) const {
    if (!(t > r)) throw std::invalid_argument("kernel: convolve_initial needs t > r");
    if (phi.size() != grid.size()) throw std::invalid_argument("kernel: phi does not match the grid");
    const auto tr = transition(r, t);
    const Eigen::MatrixXd nodes = grid.nodes();
    const Eigen::VectorXd w = grid.trapezoid_weights();
    Vector out(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      Scalar acc = 0;
      for (Eigen::Index j = 0; j < grid.size(); ++j) {
        if (phi[j] == 0) continue;
        acc += Scalar(w[j]) * phi[j] * tr.density((nodes.col(i) - nodes.col(j)).template cast<Scalar>());
      }
      out[i] = acc;
    }
    return out;
  }

 private:
  struct Transition {
    Vector mean;
    Eigen::LLT<Matrix> chol;
    Scalar log_normalizer;

    /// Density of N(mean, Sigma) at displacement y = x - x0.
    Scalar density(const Vector& y) const {
      const Vector z = chol.matrixL().solve(y - mean);
      return std::exp(log_normalizer - z.squaredNorm() / 2);
    }
  };

  void check_times(Scalar s, Scalar t) const {
    if (!(s < t)) throw std::invalid_argument("kernel: requires s < t");
  }

  Transition transition(Scalar s, Scalar t) const {
    check_times(s, t);
    Transition tr{mean_shift(s, t), Eigen::LLT<Matrix>(covariance(s, t)), 0};
    if (tr.chol.info() != Eigen::Success)
      throw std::invalid_argument("kernel: accumulated covariance is not positive definite");
    const Scalar log_det = 2 * tr.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    tr.log_normalizer = -Scalar(0.5) * (dimension_ * std::log(2 * std::numbers::pi_v<Scalar>) + log_det);
    return tr;
  }

  template <typename T, typename F>
  T integrate_in_time(Scalar s, Scalar t, T zero, const F& f) const {
    const auto& rule = gauss_legendre(16);
    const Scalar half = (t - s) / 2;
    for (int i = 0; i < rule.nodes.size(); ++i)
      zero += (Scalar(rule.weights[i]) * half) * f(s + half * (1 + Scalar(rule.nodes[i])));
    return zero;
  }

  void scan_coefficients() {
    const int samples = homogeneous_ ? 1 : 257;
    ellipticity_ = std::numeric_limits<Scalar>::infinity();
    max_diffusion_ = 0;
    drift_bound_ = 0;
    for (int k = 0; k < samples; ++k) {
      const Scalar t = samples == 1 ? 0 : horizon_ * k / (samples - 1);
      const Matrix a = diffusion_(t);
      if (a.rows() != dimension_ || a.cols() != dimension_)
        throw std::invalid_argument("kernel: diffusion matrix has the wrong shape");
      Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
      ellipticity_ = std::min(ellipticity_, eig.eigenvalues().minCoeff());
      max_diffusion_ = std::max(max_diffusion_, eig.eigenvalues().maxCoeff());
      drift_bound_ = std::max(drift_bound_, drift_(t).norm());
    }
    if (!(ellipticity_ > 0)) throw std::invalid_argument("kernel: diffusion is not uniformly elliptic");
  }

  int dimension_;
  Scalar horizon_;
  DiffusionFn diffusion_;
  DriftFn drift_;
  bool homogeneous_;
  Scalar ellipticity_ = 0;
  Scalar max_diffusion_ = 0;
  Scalar drift_bound_ = 0;
  Bounds bounds_{};
};

using Kernel = GaussianKernel<double>;

}  // namespace mfk
