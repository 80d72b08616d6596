#pragma once

#include <limits>
#include <memory>
#include <string_view>
#include <vector>

#include "spikeopt/numerics/ode.hpp"
#include "spikeopt/phase_model.hpp"

namespace spikeopt {

/// Maximum-principle constants. lambda0 is the normal-extremal normalization
/// and is always 1; mu is forced to 0 when the charge constraint is dropped.
struct ExtremalParams {
  double c = 0.0;
  double mu = 0.0;
  double lambda0 = 1.0;
  bool charge_balanced = false;
};

enum class ArcKind { Interior, PlusBang, MinusBang };

std::string_view to_string(ArcKind kind) noexcept;

struct Arc {
  double begin = 0.0;
  double end = 0.0;
  ArcKind kind = ArcKind::Interior;

  double length() const { return end - begin; }
};

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Extremal control clamped to [-bound, bound], as a function of phase.
/// Where the radicand is negative the value is -f/g before clipping.
double clipped_extremal_control(double f, double g, double c, double mu, double bound);

/// An optimal stimulus over one cycle: the closed-form phase law, its arc
/// structure, and a uniform time sampling of the resulting trajectory.
struct ControlSolution {
  PhaseModel model;
  ExtremalParams params;
  double bound = kUnbounded;
  std::vector<Arc> arcs;
  std::vector<double> switch_phases;

  double target_T = 0.0;
  double achieved_T = 0.0;
  double cost = 0.0;        // quadrature value of int I^2 dt
  double net_charge = 0.0;  // quadrature value of int I dt

  // Uniform samples on [0, achieved_T].
  std::vector<double> t;
  std::vector<double> theta;
  std::vector<double> control;
  std::vector<double> charge;

  double control_at_phase(double theta) const;
  /// Phase along the solution's own trajectory; t is clamped to [0, achieved_T].
  double phase_at(double time) const;
  /// I(t) = I(theta(t)); zero outside [0, achieved_T].
  double current_at(double time) const;

  std::shared_ptr<const OdeSolution> trajectory;
};

using ExtremalSolution = ControlSolution;

/// Integrates theta' = f + g I(theta), p' = I(theta) from (0, 0) until
/// theta = 2*pi and fills the sampled fields and achieved_T. Throws
/// Error(Infeasible) if the phase stalls.
void sample_control(ControlSolution& sol, std::size_t n_samples = 4096);

}  // namespace spikeopt
