#include "spikeopt/bounded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "spikeopt/error.hpp"
#include "spikeopt/kernels.hpp"
#include "spikeopt/numerics/quadrature.hpp"
#include "spikeopt/numerics/roots.hpp"
#include "nested.hpp"

namespace spikeopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_bound(double M) {
  if (!(M > 0.0) || std::isnan(M)) throw Error(ErrorCode::BadParameter, "current bound must be positive");
}

// Zeros of g on [0, 2 pi], including both ends, sorted.
std::vector<double> prc_breakpoints(const PhaseModel& model, int points) {
  std::vector<double> cuts{0.0};
  const double h = kTwoPi / points;
  double prev = model.g(0.0);
  for (int i = 1; i <= points; ++i) {
    const double th = i * h;
    const double cur = model.g(th);
    if (prev * cur < 0.0) {
      const double a = th - h;
      cuts.push_back(find_root_bracketed([&](double x) { return model.g(x); }, a, th));
    }
    prev = cur;
  }
  cuts.push_back(kTwoPi);
  return cuts;
}

// int dtheta / (f + s M |g|); non-positive velocity throws BangInfeasible.
double bang_time(const PhaseModel& model, double signed_M, const SolverOptions& opts) {
  auto rate_inverse = [&](double th) {
    const double rate = model.f(th) + signed_M * std::abs(model.g(th));
    if (!(rate > 0.0))
      throw Error(ErrorCode::BangInfeasible,
                  "phase velocity " + std::to_string(rate) + " under bang control at theta = " + std::to_string(th));
    return 1.0 / rate;
  };
  const int n = opts.scan_points;
  for (int i = 0; i < n; ++i) rate_inverse(kTwoPi * i / n);

  const std::vector<double> cuts = prc_breakpoints(model, n);
  auto total = [&](int panels) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double len = cuts[k + 1] - cuts[k];
      if (len <= 0.0) continue;
      const int p = std::max(2, static_cast<int>(std::ceil(panels * len / kTwoPi)));
      sum += integrate_interval(rate_inverse, cuts[k], cuts[k + 1], p, opts.quad.points_per_panel);
    }
    return sum;
  };
  int panels = opts.quad.panels;
  double coarse = total(panels);
  for (int round = 0; round < 10; ++round) {
    panels *= 2;
    const double fine = total(panels);
    if (std::abs(fine - coarse) <= opts.quad.abs_tol) return fine;
    coarse = fine;
  }
  throw Error(ErrorCode::NoConvergence, "bang-time quadrature did not settle");
}

// Unclipped extremal at one phase, -f/g where the radicand is negative.
double unclipped(const PhaseModel& model, const ExtremalParams& p, double th) {
  return clipped_extremal_control(model.f(th), model.g(th), p.c, p.mu, kUnbounded);
}

double bisect_level(const PhaseModel& model, const ExtremalParams& p, double level, double lo, double hi) {
  double h_lo = unclipped(model, p, lo) - level;
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double h_mid = unclipped(model, p, mid) - level;
    if ((h_mid > 0.0) == (h_lo > 0.0)) {
      lo = mid;
      h_lo = h_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

int classify(double u, double bound) { return u > bound ? 1 : (u < -bound ? -1 : 0); }

ArcKind kind_of(int cls) {
  return cls > 0 ? ArcKind::PlusBang : (cls < 0 ? ArcKind::MinusBang : ArcKind::Interior);
}

// Arc partition from unclipped samples u on the grid.
std::vector<Arc> arcs_from_samples(const PhaseModel& model, const ScanGrid& grid, const ExtremalParams& p,
                                   double bound, const std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<Arc> arcs;
  int cur = classify(u[0], bound);
  double start = 0.0;
  auto close = [&](double at, int next) {
    if (at > start) arcs.push_back({start, at, kind_of(cur)});
    start = at;
    cur = next;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double a = grid.theta[i];
    const double b = i + 1 < n ? grid.theta[i + 1] : kTwoPi;
    const int next = classify(i + 1 < n ? u[i + 1] : u[0], bound);
    if (next == cur) continue;
    if (cur != 0 && next != 0) {
      // Crossed the whole band inside one cell.
      const double t1 = bisect_level(model, p, cur * bound, a, b);
      close(t1, 0);
      close(bisect_level(model, p, next * bound, t1, b), next);
    } else {
      close(bisect_level(model, p, (cur != 0 ? cur : next) * bound, a, b), next);
    }
  }
  close(kTwoPi, cur);
  return arcs;
}

std::vector<double> unclipped_samples(const ScanGrid& grid, const ExtremalParams& p) {
  std::vector<double> u(grid.theta.size()), rad(grid.theta.size());
  kernels::clipped_control(grid.f, grid.g, {p.c, p.mu, kUnbounded}, u, rad);
  return u;
}

struct BoundedProblem {
  const PhaseModel& model;
  const SolverOptions& opts;
  ScanGrid grid;
  double target;
  bool balance;
  double min_rate;
  double current_scale;

  BoundedProblem(const PhaseModel& m, const SolverOptions& o, double T, bool fix_mu)
      : model(m), opts(o), grid(ScanGrid::build(m, o.scan_points)), target(T), balance(!fix_mu),
        min_rate(std::sqrt(o.feasibility_margin) * m.rate_scale()),
        current_scale(m.rate_scale() / m.prc_amplitude()) {}

  // NaN when the clipped control stalls the phase somewhere.
  Vec2 residual(const Vec2& x, double bound, const QuadratureSpec& quad) const {
    const ExtremalParams p{x[0], x[1], 1.0, balance};
    const std::vector<double> u = unclipped_samples(grid, p);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double v = std::clamp(u[i], -bound, bound);
      if (!(grid.f[i] + grid.g[i] * v > min_rate)) return {kNaN, kNaN};
    }
    const ArcIntegrals r = integrate_arcs(model, p, bound, arcs_from_samples(model, grid, p, bound, u), quad);
    if (!(r.min_rate > min_rate) || !std::isfinite(r.time)) return {kNaN, kNaN};
    return {(r.time - target) / target, balance ? r.charge / (target * current_scale) : x[1]};
  }

  Vec2 solve(const Vec2& guess, double bound, const QuadratureSpec& quad) const {
    const detail::MomentFn F = [&](double c, double mu) {
      const Vec2 r = residual({c, mu}, bound, quad);
      return detail::Moments{target * (1.0 + r[0]), balance ? r[1] * target * current_scale : 0.0};
    };
    if (!balance) return {detail::solve_c_for_time(F, 0.0, target, guess[0]), 0.0};
    const detail::Constants k = detail::solve_time_and_charge(F, target, guess[0], 0.25 * current_scale);
    return {k.c, k.mu};
  }
};

BoundedPolicy policy_from(const PhaseModel& model, const ScanGrid& grid, const ExtremalParams& p, double M) {
  BoundedPolicy policy;
  policy.M = M;
  policy.params = p;
  policy.arcs = detect_arcs(model, grid, p, M);
  policy.switch_phases = switch_phases_of(policy.arcs);
  if (policy.switch_count() > 4)
    policy.warnings.push_back("found " + std::to_string(policy.switch_count()) + " switches, more than four");
  return policy;
}

}  // namespace

double bang_min_time(const PhaseModel& model, double M, const SolverOptions& opts) {
  require_bound(M);
  return bang_time(model, M, opts);
}

double min_rate_to_prc_ratio(const PhaseModel& model, const SolverOptions& opts) {
  const int n = opts.scan_points;
  auto ratio = [&](double th) {
    const double g = std::abs(model.g(th));
    return g > 0.0 ? std::abs(model.f(th)) / g : kInf;
  };
  int best = 0;
  double best_val = kInf;
  for (int i = 0; i < n; ++i) {
    const double r = ratio(kTwoPi * i / n);
    if (r < best_val) {
      best_val = r;
      best = i;
    }
  }
  if (!std::isfinite(best_val)) return kInf;
  const double h = kTwoPi / n;
  const auto [x, v] = boost::math::tools::brent_find_minima(ratio, (best - 1) * h, (best + 1) * h, 52);
  (void)x;
  return std::min(v, best_val);
}

double bang_max_time(const PhaseModel& model, double M, const SolverOptions& opts) {
  require_bound(M);
  if (M >= min_rate_to_prc_ratio(model, opts)) return kInf;
  try {
    return bang_time(model, -M, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BangInfeasible) return kInf;
    throw;
  }
}

std::pair<double, double> istar_time_range(const PhaseModel& model, double M, bool charge_balanced,
                                           const SolverOptions& opts) {
  require_bound(M);
  if (model.kind() == ModelKind::Sinusoidal) {
    const double w = model.omega(), z = std::abs(model.z_d());
    auto period = [&](double m) {
      return integrate_periodic(
          [&](double th) {
            const double s = std::sin(th);
            return 1.0 / std::sqrt(w * w + z * m * (z * m + 2.0 * w) * s * s);
          },
          opts.quad);
    };
    return {period(M), M >= w / z ? kInf : period(-M)};
  }

  const ScanGrid grid = ScanGrid::build(model, opts.scan_points);
  // Excess of the unclipped peak over M; NaN where no extremal reaches T.
  auto excess = [&](double T) {
    try {
      const ExtremalParams p = solve_extremal_params(model, T, charge_balanced, opts);
      return grid.radicand_and_peak(p, kUnbounded).second - M;
    } catch (const Error&) {
      return kNaN;
    }
  };
  auto over = [](double e) { return !(e <= 0.0); };

  const double t_lo = bang_time(model, M, opts);
  const double t_hi = bang_max_time(model, M, opts);
  double t_ref;
  if (const auto period = model.natural_period()) {
    t_ref = *period;
  } else {
    // Geometric scan up to the family's reach, then refine around the
    // smallest peak.
    const double upper = std::isfinite(t_hi) ? t_hi : 50.0 * t_lo;
    std::vector<std::pair<double, double>> scan;
    for (double t = t_lo * 1.001; t < upper; t *= 1.25) {
      const double e = excess(t);
      scan.emplace_back(t, std::isnan(e) ? kInf : e);
      if (std::isnan(e) && scan.size() > 1 && std::isfinite(scan[scan.size() - 2].second)) break;
    }
    if (scan.empty()) return {kNaN, kNaN};
    std::size_t best = 0;
    for (std::size_t k = 1; k < scan.size(); ++k)
      if (scan[k].second < scan[best].second) best = k;
    t_ref = scan[best].first;
    if (scan[best].second > 0.0 && std::isfinite(scan[best].second)) {
      const double a = scan[best > 0 ? best - 1 : 0].first;
      const double b = scan[std::min(best + 1, scan.size() - 1)].first;
      auto peak_log = [&](double s) {
        const double e = excess(std::exp(s));
        return std::isnan(e) ? kInf : e;
      };
      t_ref = std::exp(boost::math::tools::brent_find_minima(peak_log, std::log(a), std::log(b), 12).first);
    }
  }
  if (over(excess(t_ref))) return {kNaN, kNaN};

  // Boundary of {excess <= 0} between a (inside) and b. Points beyond the
  // family's reach count as outside; the reach itself is only located (to
  // 1e-6) when no finite excess above M is met on the way.
  auto crossing = [&](double a, double b) {
    double in = a, out = b, eo = excess(b);
    while (std::isnan(eo) && std::abs(out - in) > 1e-6 * t_ref) {
      const double mid = 0.5 * (in + out);
      const double e = excess(mid);
      if (over(e)) {
        out = mid;
        eo = e;
      } else {
        in = mid;
      }
    }
    if (!over(eo)) return out;
    if (std::isnan(eo)) return in;
    return find_root_bracketed(excess, std::min(in, out), std::max(in, out), 1e-10 * t_ref, 100);
  };
  const double lower = crossing(t_ref, t_lo * (1.0 + 1e-9));
  double upper = kInf;
  if (std::isfinite(t_hi)) {
    upper = crossing(t_ref, t_hi * (1.0 - 1e-9));
  } else {
    for (double t = 2.0 * t_ref; t <= 64.0 * t_ref; t *= 2.0) {
      if (over(excess(t))) {
        upper = crossing(0.5 * t, t);
        break;
      }
    }
  }
  return {std::min(lower, t_ref), std::max(upper, t_ref)};
}

FeasibleRange feasible_range(const PhaseModel& model, double M, bool charge_balanced, const SolverOptions& opts) {
  FeasibleRange r;
  r.M = M;
  r.T_min_M = bang_min_time(model, M, opts);
  r.T_max_M = bang_max_time(model, M, opts);
  std::tie(r.T_Istar_min, r.T_Istar_max) = istar_time_range(model, M, charge_balanced, opts);
  return r;
}

std::array<double, 4> sinusoidal_switch_phases(double omega, double z_d, double M, double c) {
  require_bound(M);
  const double arg = -2.0 * M * omega / (z_d * M * M + z_d * c);
  if (!(arg > 0.0) || arg > 1.0)
    throw Error(ErrorCode::NoSwitching, "|I*| does not reach M (arcsine argument " + std::to_string(arg) + ")");
  const double t1 = std::asin(arg);
  return {t1, std::numbers::pi - t1, std::numbers::pi + t1, kTwoPi - t1};
}

std::vector<Arc> detect_arcs(const PhaseModel& model, const ScanGrid& grid, const ExtremalParams& p,
                             double bound) {
  if (grid.theta.empty()) throw Error(ErrorCode::BadParameter, "empty scan grid");
  return arcs_from_samples(model, grid, p, bound, unclipped_samples(grid, p));
}

std::vector<double> switch_phases_of(const std::vector<Arc>& arcs) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < arcs.size(); ++k) out.push_back(arcs[k].end);
  return out;
}

double bang_costate(const PhaseModel& model, const ExtremalParams& p, double u, double theta) {
  return (p.c - u * u - p.mu * u) / (model.f(theta) + u * model.g(theta));
}

double bang_adjoint_residual(const PhaseModel& model, const BoundedPolicy& policy, int samples_per_arc) {
  double worst = 0.0;
  const double h = 1e-5;
  for (const Arc& arc : policy.arcs) {
    if (arc.kind == ArcKind::Interior || arc.length() < 4.0 * h) continue;
    const double u = arc.kind == ArcKind::PlusBang ? policy.M : -policy.M;
    for (int k = 1; k <= samples_per_arc; ++k) {
      const double th = arc.begin + arc.length() * k / (samples_per_arc + 1.0);
      const double lam = bang_costate(model, policy.params, u, th);
      const double dlam = (bang_costate(model, policy.params, u, th + h) -
                           bang_costate(model, policy.params, u, th - h)) / (2.0 * h);
      const double lhs = dlam * (model.f(th) + u * model.g(th));
      const double rhs = -lam * (model.df(th) + u * model.dg(th));
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lam)));
    }
  }
  return worst;
}

BoundedSolution solve_bounded(const PhaseModel& model, double target_T, double M, bool charge_balanced,
                              const SolverOptions& opts) {
  if (std::isinf(M) && M > 0.0) {
    BoundedSolution out;
    out.control = solve_extremal(model, target_T, charge_balanced, opts);
    out.policy.M = M;
    out.policy.params = out.control.params;
    out.policy.arcs = out.control.arcs;
    return out;
  }
  require_bound(M);
  if (!(target_T > 0.0) || !std::isfinite(target_T))
    throw Error(ErrorCode::BadParameter, "target spiking time must be positive");

  double t_min;
  try {
    t_min = bang_min_time(model, M, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BangInfeasible) throw;
    throw Error(ErrorCode::OutOfRange, std::string("no spiking time reachable: ") + e.what());
  }
  const double t_max = bang_max_time(model, M, opts);
  if (target_T < t_min || target_T > t_max)
    throw Error(ErrorCode::OutOfRange, "target " + std::to_string(target_T) + " outside [" + std::to_string(t_min) +
                                           ", " + (std::isinf(t_max) ? std::string("inf") : std::to_string(t_max)) +
                                           "]");

  const bool fix_mu = !charge_balanced || has_odd_prc(model);
  const ExtremalParams free = solve_extremal_params(model, target_T, charge_balanced, opts);
  const BoundedProblem problem(model, opts, target_T, fix_mu);
  const double peak = problem.grid.radicand_and_peak(free, kUnbounded).second;

  BoundedSolution out;
  ControlSolution& sol = out.control;
  if (peak <= M) {
    sol = solve_extremal(model, target_T, charge_balanced, opts);
    sol.bound = M;
    out.policy = policy_from(model, problem.grid, sol.params, M);
    return out;
  }

  QuadratureSpec quad = opts.quad;
  Vec2 x = problem.solve({free.c, free.mu}, M, quad);
  for (int round = 0; round < 5; ++round) {
    QuadratureSpec finer = quad;
    finer.panels *= 2;
    const Vec2 r = problem.residual(x, M, finer);
    if (std::abs(r[0]) * target_T <= std::max(quad.abs_tol, 1e-11 * target_T)) break;
    quad = finer;
    x = problem.solve(x, M, quad);
  }

  const ExtremalParams params{x[0], fix_mu ? 0.0 : x[1], 1.0, charge_balanced};
  out.policy = policy_from(model, problem.grid, params, M);
  sol.model = model;
  sol.params = params;
  sol.bound = M;
  sol.arcs = out.policy.arcs;
  sol.switch_phases = out.policy.switch_phases;
  sol.target_T = target_T;
  const ArcIntegrals r = refined_integrals(model, params, M, sol.arcs, quad);
  sol.cost = r.cost;
  sol.net_charge = r.charge;
  sample_control(sol, opts.samples);
  return out;
}

}  // namespace spikeopt
