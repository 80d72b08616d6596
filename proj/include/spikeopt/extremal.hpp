#pragma once

#include <utility>
#include <vector>

#include "spikeopt/control.hpp"
#include "spikeopt/numerics/quadrature.hpp"
#include "spikeopt/numerics/roots.hpp"
#include "spikeopt/phase_model.hpp"

namespace spikeopt {

struct SolverOptions {
  QuadratureSpec quad{};
  RootFindConfig root{};
  /// Phase grid for feasibility checks and switch detection.
  int scan_points = 4096;
  /// Feasibility margin as a multiple of rate_scale()^2.
  double feasibility_margin = 1e-9;
  /// Uniform time samples stored in the returned ControlSolution.
  std::size_t samples = 4096;
};

/// Weighted integrals over a set of phase arcs under the clipped extremal.
struct ArcIntegrals {
  double time = 0.0;    // int dtheta / rate
  double charge = 0.0;  // int I / rate dtheta
  double cost = 0.0;    // int I^2 / rate dtheta
  double min_radicand = 0.0;
  double min_rate = 0.0;
};

/// f and g tabulated on a uniform phase grid (endpoint excluded).
struct ScanGrid {
  std::vector<double> theta;
  std::vector<double> f;
  std::vector<double> g;

  static ScanGrid build(const PhaseModel& model, int points);
  /// Minimum radicand and peak |I| of the control clipped to `bound`.
  std::pair<double, double> radicand_and_peak(const ExtremalParams& p, double bound) const;
};

/// f^2 - g mu f - g^2 c.
double radicand(const PhaseModel& model, const ExtremalParams& p, double theta);

/// I*(theta) = (-f + sqrt(radicand)) / g. Below |g| < 1e-6 max|g| the
/// two-term series -mu/2 - g c / (2 f) is returned instead.
/// Throws Error(InfeasiblePhase) if the radicand is negative.
double eval_unbounded_control(const PhaseModel& model, const ExtremalParams& p, double theta);

/// lambda(theta) on the negative square-root branch.
/// Throws Error(InfeasiblePhase) or Error(NearZeroPrc).
double eval_costate(const PhaseModel& model, const ExtremalParams& p, double theta);

/// H = lambda0 I^2 + lambda (f + g I) + mu I.
double hamiltonian(const PhaseModel& model, const ExtremalParams& p, double theta, double control,
                   double costate);

/// Minimum radicand on the scan grid; throws Error(InfeasibleParams) when
/// it falls below feasibility_margin * rate_scale()^2.
double check_feasible(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts = {});

/// Integrals of the control clipped to `bound` over the given arcs.
ArcIntegrals integrate_arcs(const PhaseModel& model, const ExtremalParams& p, double bound,
                            const std::vector<Arc>& arcs, const QuadratureSpec& quad);

/// Same, starting at quad.panels and doubling until T and Q settle to abs_tol.
ArcIntegrals refined_integrals(const PhaseModel& model, const ExtremalParams& p, double bound,
                               const std::vector<Arc>& arcs, QuadratureSpec quad);

/// The single interior arc [0, 2 pi).
std::vector<Arc> whole_cycle();

/// T = int_0^{2 pi} dtheta / sqrt(radicand). Throws Error(InfeasibleParams).
double spiking_time(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts = {});

/// int_0^{2 pi} I* / theta' dtheta. Throws Error(InfeasibleParams).
double net_charge(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts = {});

/// g(theta) = -g(2 pi - theta) with constant f: the charge integral vanishes
/// at mu = 0 by symmetry.
bool has_odd_prc(const PhaseModel& model);

/// Largest c keeping the radicand positive for the given mu.
double max_feasible_c(const PhaseModel& model, double mu, const SolverOptions& opts = {});

/// The (c, mu) pair of the unbounded extremal for target_T, without
/// sampling the control.
ExtremalParams solve_extremal_params(const PhaseModel& model, double target_T, bool charge_balanced,
                                     const SolverOptions& opts = {});

/// Unbounded minimum-power control reaching theta = 2 pi at target_T,
/// optionally charge-balanced. Throws Error(Infeasible) or Error(NoConvergence).
ExtremalSolution solve_extremal(const PhaseModel& model, double target_T, bool charge_balanced,
                                const SolverOptions& opts = {});

/// Peak |I*| of an extremal on the scan grid.
double peak_control(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts = {});

}  // namespace spikeopt
