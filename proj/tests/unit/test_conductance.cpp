#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "spikeopt/conductance.hpp"
#include "spikeopt/error.hpp"
#include "spikeopt/phase_model.hpp"

using namespace spikeopt;
using oracle::kTwoPi;

namespace {

// Computed once per binary; the cycle and the adjoint are reused by several cases.
struct Hh {
  ConductanceModel model = ConductanceModel::hodgkin_huxley();
  LimitCycle cycle = find_limit_cycle(model);
  AdjointPrc prc = compute_adjoint_prc(model, cycle, 1024);
};

const Hh& hh_fixture() {
  static const Hh h;
  return h;
}

}  // namespace

TEST_CASE("rate functions") {
  CHECK(hh::a_m(-40.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hh::a_n(-55.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(hh::b_m(-65.0) == doctest::Approx(4.0).epsilon(1e-14));
  // Continuous through the removable singularities.
  for (double d : {1e-9, 1e-7, 1e-5, 1e-3}) {
    CHECK(hh::a_m(-40.0 + d) == doctest::Approx(1.0 + 0.05 * d).epsilon(1e-8));
    CHECK(hh::a_n(-55.0 - d) == doctest::Approx(0.1 - 0.005 * d).epsilon(1e-8));
  }

  const MorrisLecarParams p;
  CHECK(ml::m_inf(p, p.V_1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ml::w_inf(p, p.V_3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ml::tau_w(p, p.V_3) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("vector field") {
  const ConductanceModel m = ConductanceModel::hodgkin_huxley();
  const std::vector<double> x = m.initial_state();
  REQUIRE(x.size() == 4);
  const auto d0 = m.rhs(x, 0.0);
  const auto d1 = m.rhs(x, 2.0);
  // External current enters the voltage equation only, as I / C.
  CHECK(d1[0] - d0[0] == doctest::Approx(2.0 / m.capacitance()).epsilon(1e-12));
  for (std::size_t i = 1; i < 4; ++i) CHECK(d1[i] == d0[i]);

  std::vector<double> bad = x;
  bad[0] = NAN;
  try {
    m.rhs(bad, 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
  }

  std::vector<double> out = x;
  out[2] = 1.01;
  try {
    m.check_gating(out);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GatingOutOfBounds);
  }

  const ConductanceModel ml = ConductanceModel::morris_lecar();
  CHECK(ml.dimension() == 2);
  CHECK(ml.initial_state().size() == 2);
}

TEST_CASE("limit cycles reproduce the quoted periods") {
  const Hh& h = hh_fixture();
  CHECK(h.cycle.period == doctest::Approx(14.64).epsilon(0.01 / 14.64));
  CHECK(h.cycle.omega == doctest::Approx(0.4292).epsilon(1e-4 / 0.4292));
  CHECK(h.cycle.closure_error() < 1e-6);
  for (const auto& s : h.cycle.samples) h.model.check_gating(s);
  // Phase zero sits on the spike marker.
  CHECK(std::abs(h.cycle.state_at(0.0)[0] - h.model.spike_threshold()) < 1e-6);

  const ConductanceModel ml = ConductanceModel::morris_lecar();
  const LimitCycle c = find_limit_cycle(ml);
  CHECK(c.period == doctest::Approx(22.202).epsilon(0.01 / 22.202));
  CHECK(c.omega == doctest::Approx(0.283).epsilon(1e-3 / 0.283));
  CHECK(c.closure_error() < 1e-6);
  for (const auto& s : c.samples) ml.check_gating(s);
}

TEST_CASE("resting Hodgkin-Huxley does not oscillate") {
  HodgkinHuxleyParams p;
  p.I = 0.0;
  try {
    find_limit_cycle(ConductanceModel::hodgkin_huxley(p));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoOscillation);
  }
}

TEST_CASE("adjoint PRC") {
  const Hh& h = hh_fixture();
  const PrcTable& t = h.prc.table;
  REQUIRE(t.z.size() == 1024);
  CHECK(h.prc.normalization_error < 1e-6);
  CHECK(t.omega == kTwoPi / h.cycle.period);
  // Type II shape: both lobes.
  CHECK(*std::min_element(t.z.begin(), t.z.end()) < -0.05);
  CHECK(*std::max_element(t.z.begin(), t.z.end()) > 0.1);

  const PhaseModel m = make_tabulated(t);
  CHECK(std::abs(m.g(0.0) - m.g(kTwoPi)) < 1e-8);
  // Z is the voltage component of the adjoint over C.
  for (std::size_t i = 0; i < t.z.size(); i += 97)
    CHECK(t.z[i] == doctest::Approx(h.prc.adjoint[i][0] / h.model.capacitance()).epsilon(1e-14));
  CHECK(h.prc.rounds < PrcOptions{}.max_rounds);
}

TEST_CASE("adjoint PRC matches direct perturbation") {
  const Hh& h = hh_fixture();
  const PhaseModel m = make_tabulated(h.prc.table);
  const double eps = 1e-3;
  for (int k = 0; k < 8; ++k) {
    const double th = 0.3 + 0.75 * k;
    CAPTURE(th);
    const double direct = direct_phase_shift(h.model, h.cycle, th, eps);
    const double predicted = eps * m.g(th);
    CHECK(std::abs(direct - predicted) <= 0.05 * std::abs(predicted));
  }

  const ConductanceModel ml = ConductanceModel::morris_lecar();
  const LimitCycle c = find_limit_cycle(ml);
  const PhaseModel mm = make_tabulated(compute_prc(ml, c, 1024));
  for (double th : {1.0, 2.5, 4.0, 5.5}) {
    CAPTURE(th);
    const double direct = direct_phase_shift(ml, c, th, eps);
    const double predicted = eps * mm.g(th);
    CHECK(std::abs(direct - predicted) <= 0.05 * std::abs(predicted) + 1e-9);
  }
}

TEST_CASE("capacitance scaling halves the PRC") {
  const Hh& h = hh_fixture();
  // Scaling C with every conductance and the baseline current leaves the
  // orbit in place; the current per unit capacitance halves.
  HodgkinHuxleyParams p;
  p.C *= 2.0;
  p.g_Na *= 2.0;
  p.g_k *= 2.0;
  p.g_L *= 2.0;
  p.I *= 2.0;
  const ConductanceModel doubled = ConductanceModel::hodgkin_huxley(p);
  const LimitCycle c = find_limit_cycle(doubled);
  CHECK(c.period == doctest::Approx(h.cycle.period).epsilon(1e-8));
  const PrcTable z2 = compute_prc(doubled, c, 1024);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < z2.z.size(); ++i) {
    worst = std::max(worst, std::abs(2.0 * z2.z[i] - h.prc.table.z[i]));
    scale = std::max(scale, std::abs(h.prc.table.z[i]));
  }
  CHECK(worst <= 1e-6 * scale);
}

TEST_CASE("parameter overrides") {
  ConductanceModel m = ConductanceModel::hodgkin_huxley();
  std::istringstream ok("# comment\n\n g_k = 30 \nI=12.5  # trailing\nspike_threshold=-10\n");
  apply_overrides(m, ok);
  CHECK(m.param("g_k") == 30.0);
  CHECK(m.baseline_current() == 12.5);
  CHECK(m.spike_threshold() == -10.0);

  for (const char* bad : {"nope=1\n", "g_k\n", "g_k=abc\n", "g_k=1.0x\n"}) {
    CAPTURE(bad);
    ConductanceModel fresh = ConductanceModel::hodgkin_huxley();
    std::istringstream is(bad);
    try {
      apply_overrides(fresh, is);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidInput);
    }
  }
  CHECK_THROWS_AS(apply_overrides_file(m, "/nonexistent/params.txt"), Error);

  ConductanceModel ml = ConductanceModel::morris_lecar();
  ml.set_param("V_Ca", 1.1);
  CHECK(ml.ml_params().V_Ca == 1.1);
  CHECK_THROWS_AS(ml.set_param("g_Na", 1.0), Error);
  const auto names = ml.param_names();
  CHECK(std::find(names.begin(), names.end(), "phi") != names.end());
}
