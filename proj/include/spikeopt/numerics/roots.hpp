#pragma once

#include <array>
#include <functional>

namespace spikeopt {

struct RootFindConfig {
  int max_iters = 100;
  double step_tol = 1e-13;
  double residual_tol = 1e-11;
  double damping = 1.0;

  void validate() const;
};

using Vec2 = std::array<double, 2>;

/// Residual map for 2-D root finding. A non-finite component marks a point
/// outside the map's domain; the line search backs away from it.
using Residual2 = std::function<Vec2(const Vec2&)>;

struct Root2 {
  Vec2 x{};
  Vec2 residual{};
  int iterations = 0;
};

/// Damped Newton with a central finite-difference Jacobian (step
/// 1e-6 * (1 + |x|)) and step halving whenever the residual norm does not
/// decrease. Converged when max|F| <= cfg.residual_tol.
/// Throws Error(NoConvergence) or Error(SingularJacobian).
Root2 find_root_2d(const Residual2& F, Vec2 x0, const RootFindConfig& cfg = {});

/// Root of a scalar function with a sign change on [lo, hi] (TOMS 748).
/// Throws Error(BadParameter) if the bracket has no sign change.
double find_root_bracketed(const std::function<double(double)>& F, double lo, double hi,
                           double x_tol = 1e-14, int max_iters = 200);

}  // namespace spikeopt
