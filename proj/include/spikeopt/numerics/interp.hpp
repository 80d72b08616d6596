#pragma once

#include <span>
#include <vector>

namespace spikeopt {

/// C^2 periodic cubic spline through samples on the uniform grid
/// theta_i = 2*pi*i/n, i = 0..n-1. Exact at the samples and 2*pi-periodic.
class PeriodicCubic {
 public:
  /// Throws Error(BadParameter) if fewer than 16 samples.
  explicit PeriodicCubic(std::vector<double> values);

  /// Builds from explicit (theta, value) pairs; the phases must start at 0
  /// and be uniformly spaced over [0, 2*pi) (Error(NonUniformGrid) otherwise).
  static PeriodicCubic from_samples(std::span<const double> theta, std::span<const double> values);

  double operator()(double theta) const;
  double derivative(double theta) const;
  double second_derivative(double theta) const;

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

 private:
  struct Cell {
    std::size_t i;
    double t;
  };
  Cell locate(double theta) const;

  std::vector<double> values_;
  std::vector<double> curvature_;  // second derivatives at the knots
  double h_;
};

}  // namespace spikeopt
