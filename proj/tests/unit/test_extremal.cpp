#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spikeopt/bounded.hpp"
#include "spikeopt/error.hpp"
#include "spikeopt/extremal.hpp"

using namespace spikeopt;
using oracle::kPi;
using oracle::kTwoPi;

namespace {

ExtremalParams params(double c, double mu, bool balanced = false) { return {c, mu, 1.0, balanced}; }

// max over the stored samples of |H(t) - H(0)| with the costate evaluated
// along the forward trajectory; samples where the PRC nearly vanishes are
// skipped because the costate formula divides by g^2.
double hamiltonian_drift(const PhaseModel& m, const ControlSolution& s) {
  double h0 = NAN, worst = 0.0;
  const double gmax = m.prc_amplitude();
  for (std::size_t k = 0; k < s.t.size(); k += 7) {
    const double th = std::fmod(s.theta[k], kTwoPi);
    if (std::abs(m.g(th)) < 1e-2 * gmax) continue;
    const double lam = eval_costate(m, s.params, th);
    const double H = hamiltonian(m, s.params, th, s.control[k], lam);
    if (std::isnan(h0)) h0 = H;
    worst = std::max(worst, std::abs(H - h0));
  }
  return worst;
}

}  // namespace

TEST_CASE("unbounded control evaluation") {
  const PhaseModel sn = make_sniper(1.0, 1.0);
  const PhaseModel si = make_sinusoidal(1.0, 1.0);
  for (double t : {0.1, 1.0, 3.0, 5.5}) {
    CHECK(eval_unbounded_control(sn, params(0, 0), t) == 0.0);
    CHECK(eval_costate(si, params(0, 0), t) == doctest::Approx(0.0));
  }
  CHECK(eval_unbounded_control(sn, params(0.0, 0.3), 0.0) == doctest::Approx(-0.15).epsilon(1e-12));
  // Limit from the right agrees with the series value.
  CHECK(eval_unbounded_control(sn, params(0.0, 0.3), 1e-4) == doctest::Approx(-0.15).epsilon(1e-6));
  const double theta1 = std::asin(1.2 / 2.64);
  CHECK(eval_unbounded_control(si, params(-3.0, 0.0), theta1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(eval_unbounded_control(si, params(-3.0, 0.0), 0.4720) == doctest::Approx(0.6).epsilon(1e-4));

  try {
    eval_unbounded_control(si, params(4.0, 0.0), kPi / 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasiblePhase);
  }
}

TEST_CASE("Hamiltonian reconstruction at random phases") {
  const PhaseModel m = make_sniper(1.0, 1.0);
  const ExtremalParams p = params(-0.8, 0.2, true);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, kTwoPi - 0.2);
  for (int k = 0; k < 100; ++k) {
    const double t = u(rng);
    const double I = eval_unbounded_control(m, p, t);
    const double lam = eval_costate(m, p, t);
    CHECK(hamiltonian(m, p, t, I, lam) == doctest::Approx(p.c).epsilon(1e-10));
  }
}

TEST_CASE("spiking time against the elliptic-integral oracle") {
  const PhaseModel m = make_sinusoidal(1.0, 1.0);
  CHECK(spiking_time(m, params(0, 0)) == doctest::Approx(kTwoPi).epsilon(1e-12));
  for (double T : {9.0, 4.0}) {
    const double c = oracle::sinusoidal_c_for(T);
    CHECK(spiking_time(m, params(c, 0)) == doctest::Approx(T).epsilon(1e-9));
    const ExtremalSolution s = solve_extremal(m, T, false);
    CHECK(s.params.c == doctest::Approx(c).epsilon(1e-8));
  }
  // The quoted values are rounded; the oracle gives 0.796802 and -4.15976.
  CHECK(oracle::sinusoidal_c_for(9.0) == doctest::Approx(0.794).epsilon(5e-3));
  CHECK(oracle::sinusoidal_c_for(4.0) == doctest::Approx(-4.1).epsilon(2e-2));
  CHECK_THROWS_AS(spiking_time(m, params(1.5, 0)), Error);
}

TEST_CASE("net charge") {
  const PhaseModel si = make_sinusoidal(1.0, 1.0);
  const PhaseModel sn = make_sniper(1.0, 1.0);
  CHECK(std::abs(net_charge(sn, params(0, 0))) < 1e-14);
  for (double c : {-3.0, -0.5, 0.3, 0.9}) CHECK(std::abs(net_charge(si, params(c, 0))) < 1e-10);
  CHECK(net_charge(sn, params(-0.5, 0)) > 1e-3);
  CHECK(has_odd_prc(si));
  CHECK_FALSE(has_odd_prc(sn));
}

TEST_CASE("solve_extremal examples") {
  const PhaseModel si = make_sinusoidal(1.0, 1.0);
  const ExtremalSolution z = solve_extremal(si, kTwoPi, true);
  CHECK(std::abs(z.params.c) < 1e-10);
  CHECK(z.params.mu == 0.0);
  CHECK(z.cost < 1e-16);

  for (double T : {4.0, 9.0}) {
    CAPTURE(T);
    const ExtremalSolution s = solve_extremal(si, T, true);
    CHECK(s.params.mu == 0.0);
    CHECK(std::abs(s.achieved_T - T) <= 1e-6 * T);
    CHECK(std::abs(s.net_charge) < 1e-8);
    for (double t = 0.01; t < kPi; t += 0.05)
      CHECK(std::abs(s.control_at_phase(t) + s.control_at_phase(t + kPi)) < 1e-9);
  }

  const PhaseModel sn = make_sniper(1.0, 1.0);
  std::vector<ExtremalSolution> four;
  for (double T : {5.0, 7.0})
    for (bool cb : {false, true}) four.push_back(solve_extremal(sn, T, cb));
  for (std::size_t i = 0; i < four.size(); ++i)
    for (std::size_t j = i + 1; j < four.size(); ++j) {
      const bool same = std::abs(four[i].params.c - four[j].params.c) < 1e-6 &&
                        std::abs(four[i].params.mu - four[j].params.mu) < 1e-6;
      CHECK_FALSE(same);
    }
  CHECK(std::abs(four[0].net_charge) > 1e-3);
  CHECK(std::abs(four[2].net_charge) > 1e-3);
  CHECK(std::abs(four[1].net_charge) < 1e-8);
  CHECK(std::abs(four[3].net_charge) < 1e-8);
  CHECK(four[1].cost >= four[0].cost);
  CHECK(four[3].cost >= four[2].cost);

  CHECK_THROWS_AS(solve_extremal(si, -1.0, true), Error);
}

TEST_CASE("round trip, sign law and Hamiltonian constancy") {
  struct Case {
    PhaseModel m;
    double T;
    bool cb;
  };
  const Case cases[] = {{make_sinusoidal(1, 1), 4.0, true},  {make_sinusoidal(1, 1), 9.0, true},
                        {make_sinusoidal(1, 1), 5.5, false}, {make_sniper(1, 1), 5.0, true},
                        {make_sniper(1, 1), 7.0, false},    {make_sniper(1, 1), 7.0, true},
                        {make_theta(-0.25), 10.0, true},     {make_theta(0.25), 5.0, true}};
  for (const Case& k : cases) {
    CAPTURE(k.T);
    CAPTURE(k.m.describe());
    const ExtremalSolution s = solve_extremal(k.m, k.T, k.cb);
    CHECK(spiking_time(k.m, s.params) == doctest::Approx(k.T).epsilon(1e-8));
    CHECK(hamiltonian_drift(k.m, s) <= 1e-6 * (1.0 + std::abs(s.params.c)));
  }
  const PhaseModel si = make_sinusoidal(1.0, 1.0);
  for (double T : {3.0, 5.0, 6.0, 6.5, 8.0, 12.0}) {
    const ExtremalParams p = solve_extremal_params(si, T, false);
    CHECK((p.c > 0) == (T > kTwoPi));
  }
}

TEST_CASE("optimality against random feasible controls") {
  const PhaseModel m = make_sinusoidal(1.0, 1.0);
  const ExtremalSolution s = solve_extremal(m, 9.0, true);
  const auto search = oracle::random_feasible_controls([&](double t) { return m.f(t); },
                                                       [&](double t) { return m.g(t); },
                                                       [&](double t) { return s.current_at(t); }, 9.0, true, 1000, 5);
  CHECK(search.accepted == 1000);
  CHECK(search.min_cost >= s.cost * (1.0 - 1e-6));
}

TEST_CASE("feasibility checks") {
  const PhaseModel m = make_sinusoidal(1.0, 1.0);
  CHECK(check_feasible(m, params(0.5, 0)) > 0.0);
  try {
    check_feasible(m, params(1.0 + 1e-3, 0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleParams);
  }
  CHECK(max_feasible_c(m, 0.0) == doctest::Approx(1.0).epsilon(1e-6));
}
