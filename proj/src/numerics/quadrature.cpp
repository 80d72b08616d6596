#include "spikeopt/numerics/quadrature.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "spikeopt/error.hpp"
#include "spikeopt/kernels.hpp"

namespace spikeopt {

void QuadratureSpec::validate() const {
  if (panels < 8 || points_per_panel < 4 || !(abs_tol > 0.0))
    throw Error(ErrorCode::BadParameter, "quadrature spec needs panels >= 8, points >= 4, abs_tol > 0");
}

void NodeSet::append(const NodeSet& other) {
  x.insert(x.end(), other.x.begin(), other.x.end());
  w.insert(w.end(), other.w.begin(), other.w.end());
}

namespace {

NodeSet compute_gauss_legendre(int n) {
  NodeSet rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.x[i] = -z;
    rule.x[n - 1 - i] = z;
    rule.w[i] = w;
    rule.w[n - 1 - i] = w;
  }
  return rule;
}

constexpr int kMaxCachedOrder = 64;

}  // namespace

const NodeSet& gauss_legendre(int n) {
  if (n < 1 || n > kMaxCachedOrder)
    throw Error(ErrorCode::BadParameter, "Gauss order out of range");
  static std::array<std::once_flag, kMaxCachedOrder + 1> once;
  static std::array<std::unique_ptr<NodeSet>, kMaxCachedOrder + 1> cache;
  std::call_once(once[n], [n] { cache[n] = std::make_unique<NodeSet>(compute_gauss_legendre(n)); });
  return *cache[n];
}

NodeSet composite_gauss(double a, double b, int panels, int points_per_panel) {
  const NodeSet& ref = gauss_legendre(points_per_panel);
  NodeSet out;
  out.x.reserve(static_cast<std::size_t>(panels) * points_per_panel);
  out.w.reserve(out.x.capacity());
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      out.x.push_back(mid + 0.5 * h * ref.x[k]);
      out.w.push_back(0.5 * h * ref.w[k]);
    }
  }
  return out;
}

namespace {

double apply_rule(const std::function<double(double)>& h, const NodeSet& rule) {
  std::vector<double> values(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) {
    values[i] = h(rule.x[i]);
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::NonFiniteIntegrand, "integrand not finite at theta = " + std::to_string(rule.x[i]));
  }
  return kernels::dot(values, rule.w);
}

}  // namespace

double integrate_periodic(const std::function<double(double)>& h, const QuadratureSpec& spec) {
  spec.validate();
  const double two_pi = 2.0 * std::numbers::pi;
  int panels = spec.panels;
  double coarse = apply_rule(h, composite_gauss(0.0, two_pi, panels, spec.points_per_panel));
  for (int round = 0; round < 10; ++round) {
    panels *= 2;
    const double fine = apply_rule(h, composite_gauss(0.0, two_pi, panels, spec.points_per_panel));
    if (std::abs(fine - coarse) <= spec.abs_tol) return fine;
    coarse = fine;
  }
  throw Error(ErrorCode::NoConvergence, "periodic quadrature did not reach abs_tol");
}

double integrate_interval(const std::function<double(double)>& h, double a, double b, int panels,
                          int points_per_panel) {
  return apply_rule(h, composite_gauss(a, b, panels, points_per_panel));
}

}  // namespace spikeopt
