#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace spikeopt {

struct OdeConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  bool dense_output = true;
  std::size_t max_steps = 5'000'000;

  void validate() const;
};

/// dy/dt = rhs(t, y); the forcing, if any, is captured by the closure.
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Called after every accepted step; returning false ends the integration
/// early (the solution then stops at that step).
using StepObserver = std::function<bool(double t, std::span<const double> y)>;

/// Trajectory produced by the Dormand-Prince 5(4) pair. With dense output
/// every step keeps the 4th-order continuous extension, so the state can be
/// evaluated anywhere in [t_begin, t_end] and crossings located precisely.
class OdeSolution {
 public:
  OdeSolution() = default;

  std::size_t dim() const { return dim_; }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  bool has_dense() const { return !dense_.empty(); }

  const std::vector<double>& step_times() const { return times_; }
  std::span<const double> step_state(std::size_t k) const {
    return {states_.data() + k * dim_, dim_};
  }
  std::span<const double> final_state() const { return step_state(times_.size() - 1); }

  /// Throws Error(BadParameter) outside the integrated span or without dense output.
  std::vector<double> state_at(double t) const;
  double component_at(double t, std::size_t i) const;

  /// Times in (t_begin, t_end] where component i crosses `level`;
  /// direction > 0 upward only, < 0 downward only, 0 both. Each step is
  /// subdivided before bracketing so close pairs of crossings are not lost.
  std::vector<double> crossings(std::size_t i, double level, int direction) const;

  std::size_t accepted_steps() const { return times_.size() - 1; }
  std::size_t rejected_steps() const { return rejected_; }
  std::size_t rhs_evaluations() const { return rhs_evals_; }

 private:
  friend OdeSolution integrate_ode(const OdeRhs&, std::vector<double>, double, double, const OdeConfig&,
                                   const StepObserver&);
  std::size_t locate(double t) const;

  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;
  std::vector<double> dense_;  // 5 * dim_ coefficients per step
  std::size_t rejected_ = 0;
  std::size_t rhs_evals_ = 0;
};

/// Adaptive explicit integration from t0 to t1 (t1 < t0 integrates
/// backward). Throws Error(StepSizeUnderflow), Error(NonFiniteState) or
/// Error(NoConvergence) when max_steps is exceeded.
OdeSolution integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0, double t1,
                          const OdeConfig& cfg = {}, const StepObserver& observer = {});

}  // namespace spikeopt
