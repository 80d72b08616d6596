#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spikeopt/numerics/ode.hpp"
#include "spikeopt/phase_model.hpp"

namespace spikeopt {

enum class NeuronKind { HodgkinHuxley, MorrisLecar };

std::string_view to_string(NeuronKind kind) noexcept;

struct HodgkinHuxleyParams {
  double V_Na = 50.0;
  double V_k = -77.0;
  double V_L = -54.4;
  double g_Na = 120.0;
  double g_k = 36.0;
  double g_L = 0.3;
  double C = 1.0;
  double I = 10.0;
};

struct MorrisLecarParams {
  double phi = 0.5;
  double I_b = 0.09;
  double V_1 = -0.01;
  double V_2 = 0.15;
  double V_3 = 0.1;
  double V_4 = 0.145;
  double g_Ca = 1.0;
  double g_k = 2.0;
  double g_L = 0.5;
  double V_Ca = 1.0;
  double V_k = -0.7;
  double V_L = -0.5;
  double C = 1.0;
};

namespace hh {
double a_m(double V);
double b_m(double V);
double a_h(double V);
double b_h(double V);
double a_n(double V);
double b_n(double V);
}  // namespace hh

namespace ml {
double m_inf(const MorrisLecarParams& p, double V);
double w_inf(const MorrisLecarParams& p, double V);
double tau_w(const MorrisLecarParams& p, double V);
}  // namespace ml

/// Conductance-based neuron. External current adds to the baseline and
/// enters the voltage equation as I / C. State is (V, m, h, n) or (V, w).
class ConductanceModel {
 public:
  static ConductanceModel hodgkin_huxley(const HodgkinHuxleyParams& p = {});
  static ConductanceModel morris_lecar(const MorrisLecarParams& p = {});

  NeuronKind kind() const { return kind_; }
  std::size_t dimension() const { return kind_ == NeuronKind::HodgkinHuxley ? 4 : 2; }
  double capacitance() const;
  double baseline_current() const;
  /// Upward crossing level of V that marks a spike.
  double spike_threshold() const { return spike_threshold_; }
  void set_spike_threshold(double v) { spike_threshold_ = v; }

  const HodgkinHuxleyParams& hh_params() const { return hh_; }
  const MorrisLecarParams& ml_params() const { return ml_; }

  /// Throws Error(NonFiniteState).
  void rhs(std::span<const double> x, double I_ext, std::span<double> dx) const;
  std::vector<double> rhs(const std::vector<double>& x, double I_ext) const;
  /// Row-major d(rhs)/dx by central differences.
  std::vector<double> jacobian(std::span<const double> x, double I_ext = 0.0) const;

  std::vector<double> initial_state() const;
  /// Throws Error(GatingOutOfBounds) if a gating variable leaves [0, 1]
  /// by more than tol.
  void check_gating(std::span<const double> x, double tol = 1e-9) const;

  /// Named parameter access; throws Error(InvalidInput) for unknown names.
  void set_param(std::string_view name, double value);
  double param(std::string_view name) const;
  std::vector<std::string> param_names() const;

  std::string describe() const;

 private:
  NeuronKind kind_ = NeuronKind::HodgkinHuxley;
  HodgkinHuxleyParams hh_{};
  MorrisLecarParams ml_{};
  double spike_threshold_ = 0.0;
};

/// Applies flat `key=value` lines ('#' comments, blank lines allowed).
/// Throws Error(InvalidInput) on malformed lines or unknown keys.
void apply_overrides(ConductanceModel& model, std::istream& is);
void apply_overrides_file(ConductanceModel& model, const std::string& path);

struct CycleOptions {
  OdeConfig ode{1e-10, 1e-12};
  /// Window used to find the first spikes and a rough period.
  double probe_time = 1000.0;
  double transient_periods = 20.0;
  int max_returns = 60;
  double return_tol = 1e-9;
  double closure_tol = 1e-6;
  std::size_t samples = 2048;
};

/// One period of the attracting orbit starting at the spike marker.
struct LimitCycle {
  double period = 0.0;
  double omega = 0.0;
  std::vector<double> t;
  /// samples[k] is the state at t[k].
  std::vector<std::vector<double>> samples;
  std::shared_ptr<const OdeSolution> orbit;

  /// State at time t, wrapped to [0, period).
  std::vector<double> state_at(double t) const;
  double closure_error() const;
};

/// Throws Error(NoOscillation) or Error(GatingOutOfBounds).
LimitCycle find_limit_cycle(const ConductanceModel& model, const CycleOptions& opts = {});

struct PrcOptions {
  OdeConfig ode{1e-10, 1e-12};
  int max_rounds = 40;
  /// Relative change of the adjoint at theta = 0 between rounds.
  double periodic_tol = 1e-8;
};

struct AdjointPrc {
  PrcTable table;
  /// Full adjoint on the same grid, samples[k] at theta[k].
  std::vector<std::vector<double>> adjoint;
  /// max_k |z . F(gamma) - omega| / omega.
  double normalization_error = 0.0;
  int rounds = 0;
};

/// Adjoint method: relax dz/dt = -J^T z backward along the cycle until
/// periodic, normalize z . F = omega, and return Z = z_V / C.
/// Throws Error(AdjointNoConvergence).
AdjointPrc compute_adjoint_prc(const ConductanceModel& model, const LimitCycle& cycle, std::size_t n_samples,
                               const PrcOptions& opts = {});
PrcTable compute_prc(const ConductanceModel& model, const LimitCycle& cycle, std::size_t n_samples,
                     const PrcOptions& opts = {});

/// Phase advance (rad) after a voltage kick of charge eps at phase theta,
/// measured from spike times several periods later.
double direct_phase_shift(const ConductanceModel& model, const LimitCycle& cycle, double theta, double eps,
                          int settle_periods = 12);

}  // namespace spikeopt
