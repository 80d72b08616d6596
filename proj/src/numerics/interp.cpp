#include "spikeopt/numerics/interp.hpp"

#include <cmath>
#include <numbers>

#include "spikeopt/error.hpp"

namespace spikeopt {

namespace {

// Solves the cyclic tridiagonal system with 1, 4, 1 stencil via
// Sherman-Morrison on top of a Thomas sweep.
std::vector<double> solve_cyclic(const std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  const double alpha = 1.0, beta = 1.0;  // corner entries
  const double gamma = -4.0;
  std::vector<double> diag(n, 4.0);
  diag[0] = 4.0 - gamma;
  diag[n - 1] = 4.0 - alpha * beta / gamma;

  auto thomas = [&](std::vector<double> d) {
    std::vector<double> c(n, 0.0), b = diag;
    for (std::size_t i = 1; i < n; ++i) {
      const double m = 1.0 / b[i - 1];
      b[i] -= m;
      d[i] -= m * d[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - x[i + 1]) / b[i];
    return x;
  };

  const std::vector<double> x = thomas(rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const std::vector<double> z = thomas(u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - fact * z[i];
  return out;
}

}  // namespace

PeriodicCubic::PeriodicCubic(std::vector<double> values) : values_(std::move(values)) {
  const std::size_t n = values_.size();
  if (n < 16) throw Error(ErrorCode::BadParameter, "periodic interpolant needs at least 16 samples");
  h_ = 2.0 * std::numbers::pi / static_cast<double>(n);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = values_[(i + n - 1) % n];
    const double next = values_[(i + 1) % n];
    rhs[i] = 6.0 * (next - 2.0 * values_[i] + prev) / (h_ * h_);
  }
  curvature_ = solve_cyclic(rhs);
}

PeriodicCubic PeriodicCubic::from_samples(std::span<const double> theta, std::span<const double> values) {
  if (theta.size() != values.size() || theta.size() < 16)
    throw Error(ErrorCode::NonUniformGrid, "need at least 16 (theta, value) pairs");
  const double h = 2.0 * std::numbers::pi / static_cast<double>(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (std::abs(theta[i] - h * static_cast<double>(i)) > 1e-9 * (1.0 + h * i))
      throw Error(ErrorCode::NonUniformGrid, "phase grid is not uniform on [0, 2*pi)");
  return PeriodicCubic(std::vector<double>(values.begin(), values.end()));
}

PeriodicCubic::Cell PeriodicCubic::locate(double theta) const {
  const double two_pi = 2.0 * std::numbers::pi;
  double s = std::fmod(theta, two_pi);
  if (s < 0.0) s += two_pi;
  const std::size_t n = values_.size();
  std::size_t i = static_cast<std::size_t>(s / h_);
  if (i >= n) i = n - 1;
  return {i, s - h_ * static_cast<double>(i)};
}

double PeriodicCubic::operator()(double theta) const {
  const auto [i, t] = locate(theta);
  const std::size_t j = (i + 1) % values_.size();
  const double a = h_ - t;
  return curvature_[i] * a * a * a / (6.0 * h_) + curvature_[j] * t * t * t / (6.0 * h_) +
         (values_[i] / h_ - curvature_[i] * h_ / 6.0) * a + (values_[j] / h_ - curvature_[j] * h_ / 6.0) * t;
}

double PeriodicCubic::derivative(double theta) const {
  const auto [i, t] = locate(theta);
  const std::size_t j = (i + 1) % values_.size();
  const double a = h_ - t;
  return -curvature_[i] * a * a / (2.0 * h_) + curvature_[j] * t * t / (2.0 * h_) +
         (values_[j] - values_[i]) / h_ - (curvature_[j] - curvature_[i]) * h_ / 6.0;
}

double PeriodicCubic::second_derivative(double theta) const {
  const auto [i, t] = locate(theta);
  const std::size_t j = (i + 1) % values_.size();
  return (curvature_[i] * (h_ - t) + curvature_[j] * t) / h_;
}

}  // namespace spikeopt
