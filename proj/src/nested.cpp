#include "nested.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "spikeopt/error.hpp"

namespace spikeopt::detail {

namespace {

double bracketed(const std::function<double(double)>& h, double a, double b, double ha, double hb) {
  if (ha == 0.0) return a;
  if (hb == 0.0) return b;
  std::uintmax_t iters = 200;
  const auto tol = [](double x, double y) { return std::abs(y - x) <= 1e-15 * (1.0 + std::abs(x)); };
  const auto [lo, hi] = boost::math::tools::toms748_solve(h, a, b, ha, hb, tol, iters);
  return 0.5 * (lo + hi);
}

}  // namespace

double solve_c_for_time(const MomentFn& F, double mu, double target, double c_guess) {
  const auto time_of = [&](double c) { return F(c, mu).time; };

  // Lower end: strongly negative c speeds the phase up.
  double lo = std::isfinite(c_guess) ? c_guess : 0.0;
  double t_lo = time_of(lo);
  double step = 1.0 + std::abs(lo);
  for (int k = 0; !(std::isfinite(t_lo) && t_lo <= target); ++k) {
    if (k > 60) throw Error(ErrorCode::Infeasible, "no extremal with this multiplier reaches the target time");
    lo -= step;
    step *= 2.0;
    t_lo = time_of(lo);
  }

  // Upper end: march right; on hitting the stall boundary, bisect toward it.
  double a = lo, hi = lo, t_hi = t_lo;
  step = 0.25 * (1.0 + std::abs(lo));
  double nan_at = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    if (k > 400)
      throw Error(ErrorCode::Infeasible, "spiking time " + std::to_string(target) + " is beyond the family's reach");
    const double b = std::isfinite(nan_at) ? 0.5 * (a + nan_at) : a + step;
    if (std::isfinite(nan_at) && nan_at - a <= 1e-15 * (1.0 + std::abs(a)))
      throw Error(ErrorCode::Infeasible, "spiking time " + std::to_string(target) + " is beyond the family's reach");
    const double t = time_of(b);
    if (!std::isfinite(t)) {
      nan_at = b;
      continue;
    }
    if (t >= target) {
      hi = b;
      t_hi = t;
      break;
    }
    a = b;
    t_lo = t;
    step *= 2.0;
  }
  return bracketed([&](double c) { return time_of(c) - target; }, a, hi, t_lo - target, t_hi - target);
}

Constants solve_time_and_charge(const MomentFn& F, double target, double c_guess, double mu_scale) {
  double c_last = c_guess;
  // Charge with c eliminated; NaN where no c reaches the target.
  const auto charge_of = [&](double mu) {
    try {
      const double c = solve_c_for_time(F, mu, target, c_last);
      c_last = c;
      return F(c, mu).charge;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Infeasible) throw;
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  double a = 0.0;
  double qa = charge_of(a);
  if (!std::isfinite(qa)) throw Error(ErrorCode::Infeasible, "no extremal reaches the target at mu = 0");
  if (qa == 0.0) return {c_last, 0.0};

  // The mu I term shifts the control against the charge, so charge falls as
  // mu grows.
  const double dir = qa > 0.0 ? 1.0 : -1.0;
  double step = mu_scale;
  double b = a, qb = qa;
  // Nearest mu known to leave the feasible set; steps never pass it.
  double edge = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    if (step < 1e-14 * (1.0 + std::abs(a)))
      throw Error(ErrorCode::Infeasible, "no charge-balanced control reaches the target under this bound");
    // Far out the control is clipped everywhere and the charge saturates.
    if (step > 1e8 * mu_scale)
      throw Error(ErrorCode::Infeasible, "charge keeps its sign for every multiplier; no charge-balanced control");
    if (k > 400) throw Error(ErrorCode::NoConvergence, "could not bracket the charge-balancing multiplier");
    b = a + dir * step;
    qb = charge_of(b);
    if (!std::isfinite(qb)) {
      edge = step;
      step *= 0.5;
      continue;
    }
    if ((qb > 0.0) != (qa > 0.0)) break;
    a = b;
    qa = qb;
    edge -= step;
    step = std::min(2.0 * step, 0.5 * edge);
  }
  const double lo = dir > 0.0 ? a : b, hi = dir > 0.0 ? b : a;
  const double q_lo = dir > 0.0 ? qa : qb, q_hi = dir > 0.0 ? qb : qa;
  const double mu = bracketed(charge_of, lo, hi, q_lo, q_hi);
  const double c = solve_c_for_time(F, mu, target, c_last);
  return {c, mu};
}

}  // namespace spikeopt::detail
