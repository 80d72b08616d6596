#include "spikeopt/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "spikeopt/error.hpp"
#include "spikeopt/io.hpp"

namespace spikeopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sorted interior breakpoints of [0, span].
std::vector<double> interior_points(std::vector<double> pts, double span) {
  std::erase_if(pts, [span](double b) { return !(b > 1e-12 * span && b < span * (1.0 - 1e-12)); });
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// A run of consecutive integration pieces; evaluation picks the piece that
// covers t, the later one at a shared boundary.
struct Pieces {
  std::vector<OdeSolution> parts;
  std::vector<double> ends;

  void add(OdeSolution sol, double valid_end) {
    parts.push_back(std::move(sol));
    ends.push_back(valid_end);
  }
  std::vector<double> state_at(double t) const {
    auto it = std::upper_bound(ends.begin(), ends.end(), t);
    std::size_t k = static_cast<std::size_t>(it - ends.begin());
    if (k == parts.size()) k = parts.size() - 1;
    const OdeSolution& s = parts[k];
    return s.state_at(std::clamp(t, s.t_begin(), std::min(ends[k], s.t_end())));
  }
};

}  // namespace

ControlFn control_function(const ControlSolution& sol) {
  auto copy = std::make_shared<const ControlSolution>(sol);
  return [copy](double t) { return copy->current_at(t); };
}

std::vector<double> switch_times(const ControlSolution& sol) {
  std::vector<double> out;
  if (!sol.trajectory) return out;
  for (const Arc& a : sol.arcs) {
    if (a.begin <= 0.0) continue;
    const std::vector<double> hits = sol.trajectory->crossings(0, a.begin, +1);
    if (!hits.empty()) out.push_back(hits.front());
  }
  return interior_points(out, sol.achieved_T);
}

PhaseTrajectory simulate_phase(const PhaseModel& model, const ControlFn& control, double T,
                               const PhaseSimOptions& opts) {
  if (!(T > 0.0) || !(opts.horizon >= 1.0)) throw Error(ErrorCode::BadParameter, "need T > 0 and horizon >= 1");
  const OdeRhs rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    const double I = control(t);
    dy[0] = model.f(y[0]) + model.g(y[0]) * I;
    dy[1] = I;
  };
  std::vector<double> stops = interior_points(opts.breakpoints, T);
  stops.push_back(T);
  stops.push_back(opts.horizon * T);

  Pieces run;
  std::vector<double> y{0.0, 0.0};
  double t = 0.0;
  PhaseTrajectory out;
  out.achieved_T = std::numeric_limits<double>::quiet_NaN();
  for (double stop : stops) {
    if (stop <= t) continue;
    OdeSolution seg = integrate_ode(rhs, y, t, stop, opts.ode);
    if (std::isnan(out.achieved_T)) {
      const std::vector<double> hits = seg.crossings(0, kTwoPi, +1);
      if (!hits.empty()) out.achieved_T = hits.front();
    }
    const std::span<const double> last = seg.final_state();
    y.assign(last.begin(), last.end());
    t = stop;
    run.add(std::move(seg), stop);
  }
  if (!std::isfinite(y[0])) throw Error(ErrorCode::NonFiniteState, "phase diverged");

  const std::vector<double> at_T = run.state_at(T);
  out.theta_at_T = at_T[0];
  out.charge_at_T = at_T[1];
  const std::size_t n = std::max<std::size_t>(opts.samples, 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = T * static_cast<double>(k) / static_cast<double>(n - 1);
    const std::vector<double> s = run.state_at(tk);
    out.t.push_back(tk);
    out.theta.push_back(s[0]);
    out.p.push_back(s[1]);
  }
  return out;
}

PhaseTrajectory simulate_phase(const PhaseModel& model, const ControlSolution& control,
                               const PhaseSimOptions& opts) {
  PhaseSimOptions o = opts;
  o.breakpoints = switch_times(control);
  return simulate_phase(model, control_function(control), control.target_T, o);
}

SpikeTrainReport simulate_full(const ConductanceModel& model, const LimitCycle& cycle, const ControlFn& control,
                               double period, int n_cycles, const FullSimOptions& opts) {
  if (!(period > 0.0) || n_cycles < 1) throw Error(ErrorCode::BadParameter, "need period > 0 and n_cycles >= 1");
  if (!cycle.orbit) throw Error(ErrorCode::BadParameter, "invalid limit cycle");
  const double level = model.spike_threshold();
  const double t_end = period * n_cycles;
  double origin = 0.0;

  const OdeRhs rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    const double s = t - origin;
    model.rhs(y, s >= 0.0 && s <= period ? control(s) : 0.0, dy);
  };
  const StepObserver guard = [&](double, std::span<const double> y) {
    model.check_gating(y, 1e-6);
    return true;
  };
  std::vector<double> local = interior_points(opts.breakpoints, period);
  local.push_back(period);

  SpikeTrainReport rep;
  rep.spike_times.push_back(0.0);
  Pieces run;
  std::vector<double> y = cycle.state_at(0.0);
  double t = 0.0;
  while (t < t_end * (1.0 - 1e-14)) {
    double stop = t_end;
    for (double b : local)
      if (origin + b > t * (1.0 + 1e-14) + 1e-14) {
        stop = std::min(stop, origin + b);
        break;
      }
    OdeSolution seg = integrate_ode(rhs, y, t, stop, opts.ode, guard);
    double valid_end = stop;
    // A start exactly on the threshold can register as a crossing.
    std::vector<double> ups = seg.crossings(0, level, +1);
    std::erase_if(ups, [&](double c) { return c <= rep.spike_times.back() + 1e-9 * period; });
    if (opts.spike_triggered) {
      // The first crossing restarts the control clock.
      const auto next = std::find_if(ups.begin(), ups.end(), [&](double c) { return c > origin + 0.2 * period; });
      if (next != ups.end()) {
        valid_end = *next;
        rep.spike_times.push_back(valid_end);
        y = seg.state_at(valid_end);
        origin = valid_end;
      } else {
        const std::span<const double> last = seg.final_state();
        y.assign(last.begin(), last.end());
      }
    } else {
      rep.spike_times.insert(rep.spike_times.end(), ups.begin(), ups.end());
      const std::span<const double> last = seg.final_state();
      y.assign(last.begin(), last.end());
      if (stop >= origin + period * (1.0 - 1e-14)) origin += period;
    }
    t = valid_end;
    run.add(std::move(seg), valid_end);
  }

  for (std::size_t k = 1; k < rep.spike_times.size(); ++k)
    rep.inter_spike_intervals.push_back(rep.spike_times[k] - rep.spike_times[k - 1]);
  if (!rep.inter_spike_intervals.empty()) {
    double sum = 0.0;
    for (double d : rep.inter_spike_intervals) sum += d;
    rep.mean_interval = sum / static_cast<double>(rep.inter_spike_intervals.size());
  } else {
    rep.mean_interval = std::numeric_limits<double>::quiet_NaN();
  }

  // The applied current repeats every period, so the trapezoid rule is the
  // plain sum over [0, period); I(period) would belong to the next cycle.
  const std::size_t n = std::max<std::size_t>(opts.audit_samples, 2);
  const double h = period / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double I = control(h * static_cast<double>(k));
    rep.net_charge_per_cycle += h * I;
    rep.control_cost_per_cycle += h * I * I;
  }

  if (opts.trace_dt > 0.0) {
    const std::size_t m = static_cast<std::size_t>(std::floor(t_end / opts.trace_dt + 1e-9)) + 1;
    rep.trace_t.reserve(m);
    rep.trace_V.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double tk = std::min(t_end, opts.trace_dt * static_cast<double>(k));
      rep.trace_t.push_back(tk);
      rep.trace_V.push_back(run.state_at(tk)[0]);
    }
  }
  return rep;
}

SpikeTrainReport simulate_full(const ConductanceModel& model, const ControlFn& control, double period, int n_cycles,
                               const FullSimOptions& opts) {
  return simulate_full(model, find_limit_cycle(model), control, period, n_cycles, opts);
}

Audit audit(const ControlSolution& sol) {
  Audit a;
  a.achieved_T = sol.t.empty() ? 0.0 : sol.t.back();
  for (std::size_t k = 1; k < sol.t.size(); ++k) {
    const double h = sol.t[k] - sol.t[k - 1];
    const double I0 = sol.control[k - 1], I1 = sol.control[k];
    a.net_charge += 0.5 * h * (I0 + I1);
    a.cost += 0.5 * h * (I0 * I0 + I1 * I1);
  }
  return a;
}

std::string report_json(const SpikeTrainReport& report) {
  auto rounded = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), round_sig12);
    return out;
  };
  nlohmann::ordered_json j;
  j["spike_times"] = rounded(report.spike_times);
  j["inter_spike_intervals"] = rounded(report.inter_spike_intervals);
  j["mean_interval"] = round_sig12(report.mean_interval);
  j["net_charge_per_cycle"] = round_sig12(report.net_charge_per_cycle);
  j["control_cost_per_cycle"] = round_sig12(report.control_cost_per_cycle);
  return j.dump(2) + "\n";
}

std::string trace_csv(const SpikeTrainReport& report) {
  std::ostringstream os;
  os << "t,V\n";
  for (std::size_t k = 0; k < report.trace_t.size(); ++k)
    os << format_number(report.trace_t[k]) << ',' << format_number(report.trace_V[k]) << '\n';
  return os.str();
}

}  // namespace spikeopt
