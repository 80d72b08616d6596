#pragma once

#include <functional>
#include <vector>

namespace spikeopt {

/// Composite Gauss-Legendre rule over one period.
struct QuadratureSpec {
  int panels = 64;
  int points_per_panel = 8;
  double abs_tol = 1e-10;

  /// Throws Error(BadParameter) unless panels >= 8, points >= 4, abs_tol > 0.
  void validate() const;
};

/// Nodes and weights of a quadrature rule, stored as parallel arrays so the
/// kernels can stream them.
struct NodeSet {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const { return x.size(); }
  void append(const NodeSet& other);
};

/// Gauss-Legendre rule of order n on [-1, 1]. Cached per order; thread-safe.
const NodeSet& gauss_legendre(int n);

/// `panels` equal panels on [a, b], each carrying an n-point Gauss rule.
NodeSet composite_gauss(double a, double b, int panels, int points_per_panel);

/// Integral of h over [0, 2*pi). The panel count is doubled until two
/// successive estimates agree to spec.abs_tol (at most 10 doublings).
/// Throws Error(NonFiniteIntegrand) on NaN/inf samples, Error(NoConvergence)
/// if the tolerance is never met.
double integrate_periodic(const std::function<double(double)>& h, const QuadratureSpec& spec = {});

/// Fixed composite rule on [a, b] without refinement.
double integrate_interval(const std::function<double(double)>& h, double a, double b, int panels,
                          int points_per_panel);

}  // namespace spikeopt
