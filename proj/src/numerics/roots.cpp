#include "spikeopt/numerics/roots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "spikeopt/error.hpp"

namespace spikeopt {

void RootFindConfig::validate() const {
  if (max_iters <= 0 || !(residual_tol > 0.0) || !(damping > 0.0 && damping <= 1.0))
    throw Error(ErrorCode::BadParameter, "root-find config needs residual_tol > 0 and damping in (0, 1]");
}

namespace {

double norm_inf(const Vec2& v) { return std::max(std::abs(v[0]), std::abs(v[1])); }

bool finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

// Central differences, falling back to one-sided where a probe leaves the
// residual's domain.
std::array<Vec2, 2> jacobian(const Residual2& F, const Vec2& x, const Vec2& fx) {
  std::array<Vec2, 2> cols{};
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    Vec2 xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Vec2 fp = F(xp);
    const Vec2 fm = F(xm);
    for (int i = 0; i < 2; ++i) {
      if (finite(fp) && finite(fm))
        cols[j][i] = (fp[i] - fm[i]) / (2.0 * h);
      else if (finite(fp))
        cols[j][i] = (fp[i] - fx[i]) / h;
      else if (finite(fm))
        cols[j][i] = (fx[i] - fm[i]) / h;
      else
        throw Error(ErrorCode::SingularJacobian, "residual undefined around iterate");
    }
  }
  return cols;
}

}  // namespace

Root2 find_root_2d(const Residual2& F, Vec2 x0, const RootFindConfig& cfg) {
  cfg.validate();
  Vec2 x = x0;
  Vec2 fx = F(x);
  if (!finite(fx)) throw Error(ErrorCode::NoConvergence, "residual undefined at the initial guess");

  for (int it = 0; it < cfg.max_iters; ++it) {
    const double r = norm_inf(fx);
    if (r <= cfg.residual_tol) return {x, fx, it};

    const auto J = jacobian(F, x, fx);
    const double a = J[0][0], b = J[1][0], c = J[0][1], d = J[1][1];
    const double det = a * d - b * c;
    const double scale = std::max({std::abs(a * d), std::abs(b * c), 1e-300});
    if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale || det == 0.0)
      throw Error(ErrorCode::SingularJacobian, "finite-difference Jacobian is singular");
    // Columns hold dF/dx_j, so J = [[a, c], [b, d]].
    const Vec2 step{-(d * fx[0] - c * fx[1]) / det, -(-b * fx[0] + a * fx[1]) / det};

    double alpha = cfg.damping;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Vec2 trial{x[0] + alpha * step[0], x[1] + alpha * step[1]};
      const Vec2 ft = F(trial);
      if (finite(ft) && norm_inf(ft) < r) {
        const double moved = alpha * std::max(std::abs(step[0]), std::abs(step[1]));
        x = trial;
        fx = ft;
        accepted = true;
        if (moved <= cfg.step_tol * (1.0 + std::max(std::abs(x[0]), std::abs(x[1]))) &&
            norm_inf(fx) > cfg.residual_tol)
          throw Error(ErrorCode::NoConvergence, "Newton stagnated at residual " + std::to_string(norm_inf(fx)));
        break;
      }
    }
    if (!accepted)
      throw Error(ErrorCode::NoConvergence, "line search failed at residual " + std::to_string(r));
  }
  if (norm_inf(fx) <= cfg.residual_tol) return {x, fx, cfg.max_iters};
  throw Error(ErrorCode::NoConvergence, "iteration budget exhausted");
}

double find_root_bracketed(const std::function<double(double)>& F, double lo, double hi, double x_tol,
                           int max_iters) {
  const double flo = F(lo);
  const double fhi = F(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(std::isfinite(flo) && std::isfinite(fhi)) || (flo > 0.0) == (fhi > 0.0))
    throw Error(ErrorCode::BadParameter, "bracket does not enclose a sign change");
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iters);
  const auto tol = [x_tol](double a, double b) { return std::abs(b - a) <= x_tol * (1.0 + std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (a + b);
}

}  // namespace spikeopt
