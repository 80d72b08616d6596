#include "spikeopt/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spikeopt/error.hpp"

namespace spikeopt {

std::string_view to_string(ArcKind kind) noexcept {
  switch (kind) {
    case ArcKind::Interior: return "interior";
    case ArcKind::PlusBang: return "plus_bang";
    case ArcKind::MinusBang: return "minus_bang";
  }
  return "unknown";
}

double clipped_extremal_control(double f, double g, double c, double mu, double bound) {
  const double rad = f * (f - g * mu) - g * g * c;
  double u;
  if (rad >= 0.0) {
    const double s = std::sqrt(rad);
    u = f > 0.0 ? (-mu * f - g * c) / (s + f) : (s - f) / g;
  } else {
    u = -f / g;
  }
  return std::clamp(u, -bound, bound);
}

double ControlSolution::control_at_phase(double th) const {
  return clipped_extremal_control(model.f(th), model.g(th), params.c, params.mu, bound);
}

double ControlSolution::phase_at(double time) const {
  if (!trajectory) throw Error(ErrorCode::BadParameter, "control has not been sampled");
  const double tc = std::clamp(time, 0.0, achieved_T);
  return trajectory->component_at(tc, 0);
}

double ControlSolution::current_at(double time) const {
  if (time < 0.0 || time > achieved_T) return 0.0;
  return control_at_phase(phase_at(time));
}

void sample_control(ControlSolution& sol, std::size_t n_samples) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (n_samples < 2) throw Error(ErrorCode::BadParameter, "need at least 2 samples");
  const PhaseModel& m = sol.model;
  const double c = sol.params.c, mu = sol.params.mu, bound = sol.bound;
  OdeRhs rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    const double f = m.f(y[0]), g = m.g(y[0]);
    const double u = clipped_extremal_control(f, g, c, mu, bound);
    dy[0] = f + g * u;
    dy[1] = u;
  };
  OdeConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-13;
  const double horizon = 4.0 * std::max(sol.target_T, 1.0) + 100.0;
  cfg.max_step = std::max(sol.target_T, 1.0) / 64.0;
  auto traj = integrate_ode(rhs, {0.0, 0.0}, 0.0, horizon, cfg,
                            [](double, std::span<const double> y) { return y[0] < kTwoPi; });
  if (traj.final_state()[0] < kTwoPi)
    throw Error(ErrorCode::Infeasible, "phase does not reach 2*pi under the control");
  const auto hits = traj.crossings(0, kTwoPi, +1);
  if (hits.empty()) throw Error(ErrorCode::Infeasible, "phase does not reach 2*pi under the control");
  sol.achieved_T = hits.front();
  sol.trajectory = std::make_shared<const OdeSolution>(std::move(traj));

  sol.t.resize(n_samples + 1);
  sol.theta.resize(n_samples + 1);
  sol.control.resize(n_samples + 1);
  sol.charge.resize(n_samples + 1);
  for (std::size_t k = 0; k <= n_samples; ++k) {
    const double tk = sol.achieved_T * static_cast<double>(k) / static_cast<double>(n_samples);
    const auto y = sol.trajectory->state_at(tk);
    sol.t[k] = tk;
    sol.theta[k] = y[0];
    sol.charge[k] = y[1];
    sol.control[k] = sol.control_at_phase(y[0]);
  }
  sol.theta.front() = 0.0;
  sol.charge.front() = 0.0;
}

}  // namespace spikeopt
