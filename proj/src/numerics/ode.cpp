#include "spikeopt/numerics/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spikeopt/error.hpp"

namespace spikeopt {

void OdeConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(max_step > 0.0))
    throw Error(ErrorCode::BadParameter, "ODE tolerances and max_step must be positive");
}

namespace {

// Dormand & Prince (1980), with Hairer's continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::size_t OdeSolution::locate(double t) const {
  const bool forward = times_.back() >= times_.front();
  const double lo = forward ? times_.front() : times_.back();
  const double hi = forward ? times_.back() : times_.front();
  const double slack = 1e-12 * (1.0 + std::abs(hi) + std::abs(lo));
  if (t < lo - slack || t > hi + slack)
    throw Error(ErrorCode::BadParameter, "time " + std::to_string(t) + " outside integrated span");
  std::size_t k;
  if (forward) {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    k = static_cast<std::size_t>(std::distance(times_.begin(), it));
  } else {
    auto it = std::upper_bound(times_.begin(), times_.end(), t, std::greater<>());
    k = static_cast<std::size_t>(std::distance(times_.begin(), it));
  }
  k = std::clamp<std::size_t>(k, 1, times_.size() - 1);
  return k - 1;
}

std::vector<double> OdeSolution::state_at(double t) const {
  if (!has_dense()) throw Error(ErrorCode::BadParameter, "solution has no dense output");
  const std::size_t k = locate(t);
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h;
  const double s1 = 1.0 - s;
  const double* r = dense_.data() + k * 5 * dim_;
  std::vector<double> y(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    y[i] = r[i] + s * (r[dim_ + i] + s1 * (r[2 * dim_ + i] + s * (r[3 * dim_ + i] + s1 * r[4 * dim_ + i])));
  return y;
}

double OdeSolution::component_at(double t, std::size_t i) const {
  if (!has_dense()) throw Error(ErrorCode::BadParameter, "solution has no dense output");
  const std::size_t k = locate(t);
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h;
  const double s1 = 1.0 - s;
  const double* r = dense_.data() + k * 5 * dim_;
  return r[i] + s * (r[dim_ + i] + s1 * (r[2 * dim_ + i] + s * (r[3 * dim_ + i] + s1 * r[4 * dim_ + i])));
}

std::vector<double> OdeSolution::crossings(std::size_t i, double level, int direction) const {
  if (!has_dense()) throw Error(ErrorCode::BadParameter, "solution has no dense output");
  std::vector<double> out;
  constexpr int kSub = 4;
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    const double ta = times_[k], tb = times_[k + 1];
    double t_prev = ta;
    double v_prev = states_[k * dim_ + i] - level;
    for (int s = 1; s <= kSub; ++s) {
      const double t_cur = s == kSub ? tb : ta + (tb - ta) * s / kSub;
      const double v_cur = s == kSub ? states_[(k + 1) * dim_ + i] - level : component_at(t_cur, i) - level;
      const bool up = v_prev < 0.0 && v_cur >= 0.0;
      const bool down = v_prev > 0.0 && v_cur <= 0.0;
      if ((up && direction >= 0) || (down && direction <= 0)) {
        // Illinois-modified regula falsi on the dense interpolant.
        double a = t_prev, b = t_cur, fa = v_prev, fb = v_cur;
        int side = 0;
        double tc = b;
        for (int it = 0; it < 100; ++it) {
          tc = (a * fb - b * fa) / (fb - fa);
          const double fc = component_at(tc, i) - level;
          if (fc == 0.0 || std::abs(b - a) <= 1e-14 * (1.0 + std::abs(tc))) break;
          if ((fc > 0.0) == (fb > 0.0)) {
            b = tc;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
          } else {
            a = tc;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
          }
        }
        out.push_back(tc);
      }
      t_prev = t_cur;
      v_prev = v_cur;
    }
  }
  return out;
}

OdeSolution integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0, double t1,
                          const OdeConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const std::size_t n = y0.size();
  if (!all_finite(y0)) throw Error(ErrorCode::NonFiniteState, "initial state not finite");

  OdeSolution sol;
  sol.dim_ = n;
  sol.times_.push_back(t0);
  sol.states_.insert(sol.states_.end(), y0.begin(), y0.end());
  if (t1 == t0) {
    if (cfg.dense_output) {
      // Degenerate span: a constant interpolant on a zero-length step.
      sol.times_.push_back(t0);
      sol.states_.insert(sol.states_.end(), y0.begin(), y0.end());
      sol.dense_.assign(5 * n, 0.0);
      std::copy(y0.begin(), y0.end(), sol.dense_.begin());
    }
    return sol;
  }

  const double dir = t1 > t0 ? 1.0 : -1.0;
  std::vector<double> y = std::move(y0), ynew(n), ytmp(n), err(n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  auto eval = [&](double t, const std::vector<double>& state, std::vector<double>& out) {
    rhs(t, state, out);
    ++sol.rhs_evals_;
  };

  double t = t0;
  eval(t, y, k1);
  if (!all_finite(k1)) throw Error(ErrorCode::NonFiniteState, "derivative not finite at t0");

  // Initial step (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sk) * (y[i] / sk);
      d1n += (k1[i] / sk) * (k1[i] / sk);
    }
    d0 = std::sqrt(d0 / n);
    d1n = std::sqrt(d1n / n);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min({h0, cfg.max_step, std::abs(t1 - t0)});
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + dir * h0 * k1[i];
    eval(t + dir * h0, ytmp, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
      d2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dm = std::max(d1n, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min({100.0 * h0, h1, cfg.max_step, std::abs(t1 - t0)});
  }

  double err_prev = 1e-4;
  bool last_rejected = false;
  while (dir * (t1 - t) > 0.0) {
    if (sol.accepted_steps() + sol.rejected_ >= cfg.max_steps)
      throw Error(ErrorCode::NoConvergence, "ODE step budget exhausted");
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw Error(ErrorCode::StepSizeUnderflow, "step size underflow at t = " + std::to_string(t));
    bool final_step = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      final_step = true;
    }
    const double hs = dir * h;

    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
    eval(t + c2 * hs, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    eval(t + c3 * hs, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    eval(t + c4 * hs, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    eval(t + c5 * hs, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    eval(t + hs, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    eval(t + hs, ynew, k7);

    double e = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sk = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      e += (err[i] / sk) * (err[i] / sk);
      finite = finite && std::isfinite(ynew[i]) && std::isfinite(k7[i]);
    }
    e = std::sqrt(e / n);
    if (!finite || !std::isfinite(e)) {
      // Shrink hard; a persistently non-finite state ends in underflow or here.
      if (h < 1e-10 * std::max(1.0, std::abs(t)))
        throw Error(ErrorCode::NonFiniteState, "state became non-finite at t = " + std::to_string(t));
      h *= 0.1;
      ++sol.rejected_;
      last_rejected = true;
      continue;
    }

    if (e <= 1.0) {
      if (cfg.dense_output) {
        const std::size_t base = sol.dense_.size();
        sol.dense_.resize(base + 5 * n);
        double* r = sol.dense_.data() + base;
        for (std::size_t i = 0; i < n; ++i) {
          const double ydiff = ynew[i] - y[i];
          const double bspl = hs * k1[i] - ydiff;
          r[i] = y[i];
          r[n + i] = ydiff;
          r[2 * n + i] = bspl;
          r[3 * n + i] = ydiff - hs * k7[i] - bspl;
          r[4 * n + i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
      }
      t = final_step ? t1 : t + hs;
      y.swap(ynew);
      k1.swap(k7);
      sol.times_.push_back(t);
      sol.states_.insert(sol.states_.end(), y.begin(), y.end());
      if (observer && !observer(t, y)) break;

      // PI step-size control.
      double fac = 0.9 * std::pow(std::max(e, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
      err_prev = std::max(e, 1e-4);
      h = std::min(h * fac, cfg.max_step);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      ++sol.rejected_;
      last_rejected = true;
    }
  }
  return sol;
}

}  // namespace spikeopt
