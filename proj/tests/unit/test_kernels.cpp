#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "spikeopt/error.hpp"
#include "spikeopt/extremal.hpp"
#include "spikeopt/kernels.hpp"

using namespace spikeopt;
namespace k = spikeopt::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

bool close(double a, double b, double rel) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= rel * (1.0 + std::abs(a) + std::abs(b));
}

// Restores the startup backend when a test case ends.
struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

}  // namespace

TEST_CASE("backend selection") {
  BackendGuard guard;
  CHECK(k::backend_available(k::Backend::Scalar));
  k::set_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  CHECK(k::backend_name(k::Backend::Scalar) == "scalar");
  if (k::backend_available(k::Backend::Avx2)) {
    k::set_backend(k::Backend::Avx2);
    CHECK(k::active_backend() == k::Backend::Avx2);
  } else {
    CHECK_THROWS_AS(k::set_backend(k::Backend::Avx2), Error);
  }
}

TEST_CASE("size mismatches are rejected") {
  std::vector<double> a(3), b(4), y(2);
  CHECK_THROWS_AS(k::dot(a, b), Error);
  CHECK_THROWS_AS(k::gemv(a, b, y), Error);
}

TEST_CASE("scalar reference kernels") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(k::detail::scalar_table.dot(a.data(), b.data(), 3) == doctest::Approx(32.0));

  const std::vector<double> A{1, 2, 3, 4, 5, 6};  // 2 x 3
  std::vector<double> y(2);
  k::detail::scalar_table.gemv(A.data(), 2, 3, a.data(), y.data());
  CHECK(y[0] == doctest::Approx(14.0));
  CHECK(y[1] == doctest::Approx(32.0));

  // c = mu = 0: I* = 0 and the radicand is f^2.
  const std::vector<double> f{1.0, 2.0}, g{0.5, -0.5};
  std::vector<double> I(2), r(2);
  k::detail::scalar_table.clipped_control(f.data(), g.data(), 2, {0.0, 0.0, 1.0}, I.data(), r.data());
  CHECK(I[0] == 0.0);
  CHECK(r[1] == doctest::Approx(4.0));
}

#if defined(SPIKEOPT_HAVE_AVX2_KERNELS)
TEST_CASE("AVX2 kernels match the scalar reference at every tail length") {
  if (!k::backend_available(k::Backend::Avx2)) {
    MESSAGE("AVX2 not supported on this CPU; equivalence not exercised");
    return;
  }
  const auto& S = k::detail::scalar_table;
  const auto& V = k::detail::avx2_table;
  std::mt19937_64 rng(7);
  const double inf = std::numeric_limits<double>::infinity();

  for (std::size_t n = 0; n <= 37; ++n) {
    CAPTURE(n);
    const auto a = random_vector(rng, n, -2.0, 2.0);
    const auto b = random_vector(rng, n, -2.0, 2.0);
    CHECK(close(S.dot(a.data(), b.data(), n), V.dot(a.data(), b.data(), n), 1e-14));

    for (std::size_t rows : {std::size_t{1}, std::size_t{5}}) {
      const auto A = random_vector(rng, rows * n, -1.0, 1.0);
      std::vector<double> ys(rows), yv(rows);
      S.gemv(A.data(), rows, n, a.data(), ys.data());
      V.gemv(A.data(), rows, n, a.data(), yv.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(close(ys[i], yv[i], 1e-14));
    }

    // f near omega, g sinusoid-like; some coefficients make the radicand
    // negative and some clip.
    const auto f = random_vector(rng, n, 0.5, 1.5);
    const auto g = random_vector(rng, n, -1.0, 1.0);
    const auto w = random_vector(rng, n, 0.0, 0.1);
    for (const k::ExtremalCoeffs& c : {k::ExtremalCoeffs{0.3, 0.1, inf}, k::ExtremalCoeffs{-2.0, 0.4, 0.6},
                                       k::ExtremalCoeffs{5.0, -0.2, 1.0}}) {
      const auto ms = S.extremal_moments(f.data(), g.data(), w.data(), n, c);
      const auto mv = V.extremal_moments(f.data(), g.data(), w.data(), n, c);
      if (std::isfinite(ms.time)) {
        CHECK(close(ms.time, mv.time, 1e-13));
        CHECK(close(ms.charge, mv.charge, 1e-13));
        CHECK(close(ms.cost, mv.cost, 1e-13));
      } else {
        // A stalled node; the sums are meaningless but must stay non-finite.
        CHECK_FALSE(std::isfinite(mv.time));
      }
      CHECK(close(ms.min_radicand, mv.min_radicand, 1e-13));
      CHECK(close(ms.min_rate, mv.min_rate, 1e-13));

      std::vector<double> Is(n), rs(n), Iv(n), rv(n);
      S.clipped_control(f.data(), g.data(), n, c, Is.data(), rs.data());
      V.clipped_control(f.data(), g.data(), n, c, Iv.data(), rv.data());
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(close(Is[i], Iv[i], 1e-12));
        CHECK(close(rs[i], rv[i], 1e-13));
      }
    }
  }
}

TEST_CASE("solver results agree across backends") {
  if (!k::backend_available(k::Backend::Avx2)) return;
  BackendGuard guard;
  const PhaseModel m = make_sniper(1.0, 1.0);
  k::set_backend(k::Backend::Scalar);
  const ExtremalParams ps = solve_extremal_params(m, 5.0, true);
  k::set_backend(k::Backend::Avx2);
  const ExtremalParams pv = solve_extremal_params(m, 5.0, true);
  CHECK(ps.c == doctest::Approx(pv.c).epsilon(1e-10));
  CHECK(ps.mu == doctest::Approx(pv.mu).epsilon(1e-10));
}
#endif
