#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "spikeopt/conductance.hpp"
#include "spikeopt/error.hpp"
#include "spikeopt/numerics/interp.hpp"
#include "spikeopt/numerics/ode.hpp"
#include "spikeopt/numerics/quadrature.hpp"
#include "spikeopt/numerics/roots.hpp"

using namespace spikeopt;
using oracle::kPi;
using oracle::kTwoPi;

TEST_CASE("periodic quadrature") {
  CHECK(integrate_periodic([](double t) { return std::sin(t) * std::sin(t); }) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(integrate_periodic([](double) { return 1.0; }) == doctest::Approx(kTwoPi).epsilon(1e-14));
  const double v = integrate_periodic([](double t) { return 1.0 / (1.4 - 0.4 * std::cos(t)); });
  CHECK(std::abs(v - oracle::cosine_period(1.4, -0.4)) < 1e-10);
  CHECK(std::abs(v - kTwoPi / std::sqrt(1.8)) < 1e-10);

  SUBCASE("non-finite integrand") {
    auto h = [](double t) { return t > 1.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0; };
    try {
      integrate_periodic(h);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteIntegrand);
    }
  }
  SUBCASE("spec validation") {
    CHECK_THROWS_AS((QuadratureSpec{4, 8, 1e-10}.validate()), Error);
    CHECK_THROWS_AS((QuadratureSpec{64, 2, 1e-10}.validate()), Error);
    CHECK_THROWS_AS((QuadratureSpec{64, 8, 0.0}.validate()), Error);
  }
}

TEST_CASE("composite Gauss is exact on low trigonometric degrees") {
  for (int k = 0; k <= 6; ++k) {
    const NodeSet rule = composite_gauss(0.0, kTwoPi, 8, 8);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) s += rule.w[i] * std::cos(k * rule.x[i]);
    CHECK(std::abs(s - (k == 0 ? kTwoPi : 0.0)) < 1e-13);
  }
  CHECK(integrate_interval([](double x) { return x * x * x; }, 0.0, 2.0, 1, 4) == doctest::Approx(4.0));
}

TEST_CASE("2-D root finding") {
  auto lin = [](const Vec2& x) { return Vec2{x[0] - 1.0, x[1] + 2.0}; };
  const Root2 r = find_root_2d(lin, {0.0, 0.0});
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(-2.0));

  auto quad = [](const Vec2& x) { return Vec2{x[0] * x[0] - 4.0, x[1]}; };
  const Root2 q = find_root_2d(quad, {1.0, 1.0});
  CHECK(q.x[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::abs(q.x[1]) < 1e-10);

  SUBCASE("no root") {
    auto none = [](const Vec2& x) { return Vec2{x[0] * x[0] + 1.0, x[1] * x[1] + 1.0}; };
    try {
      find_root_2d(none, {0.5, 0.5});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::NoConvergence || e.code() == ErrorCode::SingularJacobian));
    }
  }

  SUBCASE("invariant under residual scaling") {
    const RootFindConfig cfg;
    for (double s : {1e-3, 0.5, 7.0, 1e3}) {
      auto scaled = [&](const Vec2& x) {
        const Vec2 v = quad(x);
        return Vec2{s * v[0], s * v[1]};
      };
      RootFindConfig c = cfg;
      c.residual_tol = cfg.residual_tol * s;
      const Root2 rs = find_root_2d(scaled, {1.0, 1.0}, c);
      CHECK(std::abs(rs.x[0] - q.x[0]) <= 1e-10);
      CHECK(std::abs(rs.x[1] - q.x[1]) <= 1e-10);
    }
  }
}

TEST_CASE("bracketed root") {
  CHECK(find_root_bracketed([](double x) { return std::cos(x) - x; }, 0.0, 1.0) ==
        doctest::Approx(0.7390851332151607).epsilon(1e-13));
  CHECK_THROWS_AS(find_root_bracketed([](double x) { return x * x + 1.0; }, -1.0, 1.0), Error);
}

TEST_CASE("ODE integration") {
  SUBCASE("decay") {
    const OdeSolution s = integrate_ode([](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; },
                                        {1.0}, 0.0, 1.0);
    CHECK(std::abs(s.final_state()[0] - std::exp(-1.0)) < 1e-8);
    CHECK(std::abs(s.state_at(0.5)[0] - std::exp(-0.5)) < 1e-8);
  }
  SUBCASE("free phase") {
    const OdeSolution s =
        integrate_ode([](double, std::span<const double>, std::span<double> dy) { dy[0] = 1.0; }, {0.0}, 0.0, kTwoPi);
    CHECK(s.final_state()[0] == doctest::Approx(kTwoPi).epsilon(1e-13));
    const auto hits = s.crossings(0, kPi, +1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == doctest::Approx(kPi).epsilon(1e-12));
  }
  SUBCASE("backward") {
    const OdeSolution s = integrate_ode([](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0]; },
                                        {1.0}, 1.0, 0.0);
    CHECK(std::abs(s.final_state()[0] - std::exp(-1.0)) < 1e-8);
  }
  SUBCASE("non-finite state") {
    try {
      integrate_ode([](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0] * y[0]; }, {1.0}, 0.0,
                    2.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::NonFiniteState || e.code() == ErrorCode::StepSizeUnderflow ||
             e.code() == ErrorCode::NoConvergence));
    }
  }
  SUBCASE("bad configuration") { CHECK_THROWS_AS((OdeConfig{-1.0, 1e-10}.validate()), Error); }
}

TEST_CASE("ODE error shrinks with tolerance on Hodgkin-Huxley") {
  const ConductanceModel hh = ConductanceModel::hodgkin_huxley();
  const OdeRhs rhs = [&](double, std::span<const double> y, std::span<double> dy) { hh.rhs(y, 0.0, dy); };
  const std::vector<double> y0 = hh.initial_state();
  const double t1 = 40.0;
  const auto ref = integrate_ode(rhs, y0, 0.0, t1, {1e-13, 1e-15}).final_state();
  auto error_at = [&](double rtol) {
    const auto y = integrate_ode(rhs, y0, 0.0, t1, {rtol, rtol * 1e-2}).final_state();
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) e = std::max(e, std::abs(y[i] - ref[i]) / (1.0 + std::abs(ref[i])));
    return e;
  };
  const double coarse = error_at(1e-6);
  const double fine = error_at(1e-7);
  CHECK(fine * 2.0 <= coarse);
}

TEST_CASE("periodic cubic interpolant") {
  std::vector<double> s(64);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(kTwoPi * i / 64.0);
  const PeriodicCubic p(s);
  CHECK(std::abs(p(kPi / 2) - 1.0) < 1e-6);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(p(kTwoPi * i / 64.0) == doctest::Approx(s[i]).epsilon(1e-13));

  const PeriodicCubic flat(std::vector<double>(32, 3.0));
  for (double t : {0.0, 0.3, 2.9, 6.1}) CHECK(flat(t) == doctest::Approx(3.0).epsilon(1e-14));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int k = 0; k < 100; ++k) {
    const double t = u(rng);
    CHECK(p(t + kTwoPi) == doctest::Approx(p(t)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(PeriodicCubic(std::vector<double>(8, 1.0)), Error);
  std::vector<double> th(32), v(32, 0.0);
  for (std::size_t i = 0; i < th.size(); ++i) th[i] = kTwoPi * i / 32.0;
  th[5] += 1e-3;
  try {
    PeriodicCubic::from_samples(th, v);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonUniformGrid);
  }
}
