#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spikeopt/conductance.hpp"
#include "spikeopt/control.hpp"
#include "spikeopt/numerics/ode.hpp"
#include "spikeopt/phase_model.hpp"

namespace spikeopt {

/// External current as a function of time within one designed cycle.
using ControlFn = std::function<double(double t)>;

/// I(t) of an indirect solution, zero past its achieved period.
ControlFn control_function(const ControlSolution& sol);
/// Times of the arc boundaries of an indirect solution, where I(t) may jump.
std::vector<double> switch_times(const ControlSolution& sol);

struct PhaseTrajectory {
  std::vector<double> t;
  std::vector<double> theta;
  std::vector<double> p;
  /// First time theta reaches 2 pi, NaN if it does not within the horizon.
  double achieved_T = 0.0;
  /// theta and p at the design period.
  double theta_at_T = 0.0;
  double charge_at_T = 0.0;
};

struct PhaseSimOptions {
  OdeConfig ode{1e-11, 1e-13};
  std::size_t samples = 2048;
  /// Integration runs to horizon * T so a late arrival at 2 pi is still seen.
  double horizon = 2.0;
  /// Times within [0, T] where the control may jump; integration restarts there.
  std::vector<double> breakpoints;
};

/// Forward integration of theta' = f + g I(t), p' = I(t) from (0, 0) over
/// [0, horizon * T]. Throws Error(NonFiniteState).
PhaseTrajectory simulate_phase(const PhaseModel& model, const ControlFn& control, double T,
                               const PhaseSimOptions& opts = {});
PhaseTrajectory simulate_phase(const PhaseModel& model, const ControlSolution& control,
                               const PhaseSimOptions& opts = {});

struct SpikeTrainReport {
  std::vector<double> spike_times;
  std::vector<double> inter_spike_intervals;
  double mean_interval = 0.0;
  double net_charge_per_cycle = 0.0;
  double control_cost_per_cycle = 0.0;
  /// Voltage samples on a uniform grid over the whole run.
  std::vector<double> trace_t;
  std::vector<double> trace_V;
};

struct FullSimOptions {
  OdeConfig ode{1e-10, 1e-12};
  /// Restart the control clock at each detected spike instead of every period.
  bool spike_triggered = false;
  double trace_dt = 0.01;
  /// Uniform samples per period for the charge and cost of the applied control.
  std::size_t audit_samples = 8192;
  /// Jump times of the control within one period.
  std::vector<double> breakpoints;
};

/// Starts at the spike marker of the limit cycle (the t = 0 spike is
/// reported) and applies the control additively to the baseline current,
/// repeated every `period`, for n_cycles periods. Spikes are upward
/// threshold crossings of V with interpolated times.
SpikeTrainReport simulate_full(const ConductanceModel& model, const LimitCycle& cycle, const ControlFn& control,
                               double period, int n_cycles, const FullSimOptions& opts = {});
/// Same, finding the limit cycle first. Throws Error(NoOscillation).
SpikeTrainReport simulate_full(const ConductanceModel& model, const ControlFn& control, double period, int n_cycles,
                               const FullSimOptions& opts = {});

struct Audit {
  double cost = 0.0;
  double net_charge = 0.0;
  double achieved_T = 0.0;
};

/// Trapezoidal cost and charge on the solution's own time samples.
Audit audit(const ControlSolution& sol);

std::string report_json(const SpikeTrainReport& report);
/// `t,V` with a header row.
std::string trace_csv(const SpikeTrainReport& report);

}  // namespace spikeopt
