#pragma once

// Shared (c, mu) search for the unbounded and clipped extremal families.
// The spiking time is nondecreasing in c for fixed mu and blows up where the
// phase velocity first touches zero; past that point the moments are NaN.

#include <functional>

namespace spikeopt::detail {

struct Moments {
  double time = 0.0;
  double charge = 0.0;
};

using MomentFn = std::function<Moments(double c, double mu)>;

/// c with time(c, mu) = target. Throws Error(Infeasible) if no such c.
double solve_c_for_time(const MomentFn& F, double mu, double target, double c_guess);

struct Constants {
  double c = 0.0;
  double mu = 0.0;
};

/// (c, mu) with time = target and charge = 0, by bracketing the charge in mu
/// with c eliminated through solve_c_for_time. mu_scale sets the first step.
Constants solve_time_and_charge(const MomentFn& F, double target, double c_guess, double mu_scale);

}  // namespace spikeopt::detail
