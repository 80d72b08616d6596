#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "spikeopt/control.hpp"
#include "spikeopt/extremal.hpp"
#include "spikeopt/phase_model.hpp"

namespace spikeopt {

/// Spiking times reachable under |I| <= M, and the sub-interval on which the
/// unclipped extremal already respects the bound. Infinite entries mean
/// unbounded above; NaN I* entries mean no target is served by pure I*.
struct FeasibleRange {
  double M = 0.0;
  double T_min_M = 0.0;
  double T_max_M = kUnbounded;
  double T_Istar_min = 0.0;
  double T_Istar_max = kUnbounded;
};

struct BoundedPolicy {
  double M = 0.0;
  ExtremalParams params;
  /// Ordered, partitioning [0, 2 pi).
  std::vector<Arc> arcs;
  /// Arc boundaries strictly inside (0, 2 pi).
  std::vector<double> switch_phases;
  std::vector<std::string> warnings;

  std::size_t switch_count() const { return switch_phases.size(); }
};

struct BoundedSolution {
  BoundedPolicy policy;
  ControlSolution control;
};

/// Minimum spiking time: I = +M where g >= 0, -M where g < 0.
/// Throws Error(BangInfeasible) if the phase velocity is not positive.
double bang_min_time(const PhaseModel& model, double M, const SolverOptions& opts = {});

/// min over theta of |f/g|; +inf when g vanishes identically.
double min_rate_to_prc_ratio(const PhaseModel& model, const SolverOptions& opts = {});

/// Maximum spiking time with the opposite bang control, or +inf when
/// M >= min |f/g|.
double bang_max_time(const PhaseModel& model, double M, const SolverOptions& opts = {});

/// Targets for which the unclipped extremal satisfies |I*| <= M.
std::pair<double, double> istar_time_range(const PhaseModel& model, double M, bool charge_balanced = true,
                                           const SolverOptions& opts = {});

FeasibleRange feasible_range(const PhaseModel& model, double M, bool charge_balanced = true,
                             const SolverOptions& opts = {});

/// Closed-form switch angles of the sinusoidal model where I* = +M.
/// Throws Error(NoSwitching) when |I*| never reaches M.
std::array<double, 4> sinusoidal_switch_phases(double omega, double z_d, double M, double c);

/// Arc structure of the extremal clipped to [-bound, bound] from a sign scan
/// of I* -+ bound on the grid, boundaries refined by bisection to 1e-12 rad.
std::vector<Arc> detect_arcs(const PhaseModel& model, const ScanGrid& grid, const ExtremalParams& p,
                             double bound);

/// Interior boundaries of an arc list.
std::vector<double> switch_phases_of(const std::vector<Arc>& arcs);

/// Multiplier on a bang arc with I = u: (c - u^2 - mu u) / (f + u g).
double bang_costate(const PhaseModel& model, const ExtremalParams& p, double u, double theta);

/// Largest relative residual of lambda' = -lambda (f' + u g') on the bang
/// arcs, with lambda from bang_costate and the derivative by central
/// differences along the phase.
double bang_adjoint_residual(const PhaseModel& model, const BoundedPolicy& policy, int samples_per_arc = 32);

/// Minimum-power control under |I| <= M. M = +inf defers to solve_extremal.
/// Throws Error(OutOfRange) outside [T_min_M, T_max_M], Error(NoConvergence).
BoundedSolution solve_bounded(const PhaseModel& model, double target_T, double M, bool charge_balanced,
                              const SolverOptions& opts = {});

}  // namespace spikeopt
