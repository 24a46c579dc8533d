#include "mfk/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace mfk {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

}  // namespace

SpectralGrid::SpectralGrid(SpatialGrid space) : space_(std::move(space)) {
  space_.validate();
  const int n = space_.nodes_per_axis;
  const int d = space_.dimension;
  const double period = n * space_.spacing();
  Eigen::VectorXd axis_k(n);
  Eigen::VectorXd axis_deriv(n);
  for (int m = 0; m < n; ++m) {
    const int signed_m = (m <= n / 2) ? m : m - n;
    axis_k[m] = 2.0 * std::numbers::pi * signed_m / period;
    axis_deriv[m] = (n % 2 == 0 && m == n / 2) ? 0.0 : axis_k[m];
  }
  max_wavenumber_ = axis_k.cwiseAbs().maxCoeff();
  wavenumbers_.resize(d, size());
  derivative_.assign(d, Eigen::VectorXcd(size()));
  for (Eigen::Index j = 0; j < size(); ++j) {
    Eigen::Index flat = j;
    for (int a = 0; a < d; ++a) {
      const auto m = flat % n;
      wavenumbers_(a, j) = axis_k[m];
      derivative_[a][j] = kI * axis_deriv[m];
      flat /= n;
    }
  }
}

void SpectralGrid::transform(Eigen::VectorXcd& data, bool inverse) const {
  auto& fft = fft_engine();
  const Eigen::Index n = space_.nodes_per_axis;
  if (space_.dimension == 1) {
    Eigen::VectorXcd out(n);
    if (inverse)
      fft.inv(out, data);
    else
      fft.fwd(out, data);
    data = std::move(out);
    return;
  }
  Eigen::VectorXcd line(n), out(n);
  Eigen::Index stride = 1;
  for (int a = 0; a < space_.dimension; ++a) {
    for (Eigen::Index base = 0; base < size(); ++base) {
      if ((base / stride) % n != 0) continue;  // first element of a line along axis a
      for (Eigen::Index i = 0; i < n; ++i) line[i] = data[base + i * stride];
      if (inverse)
        fft.inv(out, line);
      else
        fft.fwd(out, line);
      for (Eigen::Index i = 0; i < n; ++i) data[base + i * stride] = out[i];
    }
    stride *= n;
  }
}

Eigen::VectorXcd SpectralGrid::forward(const Eigen::Ref<const Eigen::VectorXd>& values) const {
  Eigen::VectorXcd data = values.cast<std::complex<double>>();
  transform(data, false);
  return data;
}

Eigen::VectorXd SpectralGrid::inverse(const Eigen::Ref<const Eigen::VectorXcd>& spectrum) const {
  Eigen::VectorXcd data = spectrum;
  transform(data, true);
  return data.real();
}

TransitionSymbols::TransitionSymbols(const Kernel& kernel, const SpectralGrid& grid)
    : kernel_(kernel), grid_(&grid) {
  if (kernel.dimension() != grid.space().dimension)
    throw std::invalid_argument("spectral: kernel and grid dimensions differ");
  const Eigen::MatrixXd& k = grid.wavenumbers();
  if (kernel_.time_homogeneous()) {
    const Eigen::MatrixXd a = kernel_.diffusion(0.0);
    const Eigen::VectorXd b0 = kernel_.drift(0.0);
    const Eigen::ArrayXd quad = (k.transpose() * a).cwiseProduct(k.transpose()).rowwise().sum().array();
    const Eigen::ArrayXd lin = (k.transpose() * b0).array();
    rate_ = 0.5 * quad.cast<std::complex<double>>() + kI * lin.cast<std::complex<double>>();
    max_rate_ = rate_.abs().maxCoeff();
  } else {
    const double kmax = grid.max_wavenumber() * std::sqrt(static_cast<double>(kernel.dimension()));
    max_rate_ = 0.5 * kernel_.max_diffusion() * kmax * kmax + kmax * kernel_.drift_bound();
  }
}

Eigen::ArrayXcd TransitionSymbols::exponent(double s, double t) const {
  if (kernel_.time_homogeneous()) return -(t - s) * rate_;
  const Eigen::MatrixXd& k = grid_->wavenumbers();
  if (t <= s) return Eigen::ArrayXcd::Zero(k.cols());
  const Eigen::MatrixXd sigma = kernel_.covariance(s, t);
  const Eigen::VectorXd m = kernel_.mean_shift(s, t);
  const Eigen::ArrayXd quad = (k.transpose() * sigma).cwiseProduct(k.transpose()).rowwise().sum().array();
  const Eigen::ArrayXd lin = (k.transpose() * m).array();
  return -0.5 * quad.cast<std::complex<double>>() - kI * lin.cast<std::complex<double>>();
}

Eigen::VectorXcd TransitionSymbols::propagator(double s, double t) const {
  if (t < s) throw std::invalid_argument("spectral: propagator needs s <= t");
  return exponent(s, t).exp().matrix();
}

TransitionSymbols::IntervalWeights TransitionSymbols::interval(double t0, double t1, double t) const {
  if (!(t0 < t1) || t1 > t + 1e-12) throw std::invalid_argument("spectral: interval needs t0 < t1 <= t");
  const double w0 = std::sqrt(std::max(0.0, t - t1));
  const double w1 = std::sqrt(t - t0);
  const double width = t1 - t0;
  const int panels = std::clamp(static_cast<int>(std::ceil(1.5 * (w1 - w0) * std::sqrt(max_rate_))), 1, 512);
  constexpr int order = 12;
  const auto& rule = gauss_legendre(order);
  const Eigen::Index n = grid_->size();
  IntervalWeights out{Eigen::VectorXcd::Zero(n), Eigen::VectorXcd::Zero(n)};
  const double panel = (w1 - w0) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = w0 + p * panel;
    for (int i = 0; i < order; ++i) {
      const double w = lo + 0.5 * panel * (1.0 + rule.nodes[i]);
      const double s = t - w * w;
      const double jacobian = rule.weights[i] * 0.5 * panel * 2.0 * w;
      const Eigen::ArrayXcd symbol = exponent(s, t).exp();
      const double right = std::clamp((s - t0) / width, 0.0, 1.0);
      out.left.array() += (jacobian * (1.0 - right)) * symbol;
      out.right.array() += (jacobian * right) * symbol;
    }
  }
  return out;
}

}  // namespace mfk
