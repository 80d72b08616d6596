#include "spikeopt/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "spikeopt/error.hpp"
#include "spikeopt/kernels.hpp"
#include "nested.hpp"

namespace spikeopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double singular_prc_threshold(const PhaseModel& model) { return 1e-6 * model.prc_amplitude(); }

double margin(const PhaseModel& model, const SolverOptions& opts) {
  const double s = model.rate_scale();
  return opts.feasibility_margin * s * s;
}

int panels_for(double length, const QuadratureSpec& quad) {
  return std::max(2, static_cast<int>(std::ceil(quad.panels * length / kTwoPi - 1e-9)));
}

}  // namespace

std::vector<Arc> whole_cycle() { return {Arc{0.0, kTwoPi, ArcKind::Interior}}; }

ArcIntegrals refined_integrals(const PhaseModel& model, const ExtremalParams& p, double bound,
                               const std::vector<Arc>& arcs, QuadratureSpec quad) {
  ArcIntegrals coarse = integrate_arcs(model, p, bound, arcs, quad);
  for (int round = 0; round < 6; ++round) {
    quad.panels *= 2;
    const ArcIntegrals fine = integrate_arcs(model, p, bound, arcs, quad);
    if (std::abs(fine.time - coarse.time) <= quad.abs_tol && std::abs(fine.charge - coarse.charge) <= quad.abs_tol)
      return fine;
    coarse = fine;
  }
  return coarse;
}

ScanGrid ScanGrid::build(const PhaseModel& model, int points) {
  if (points < 16) throw Error(ErrorCode::BadParameter, "scan grid too coarse");
  ScanGrid grid;
  grid.theta.resize(points);
  grid.f.resize(points);
  grid.g.resize(points);
  for (int i = 0; i < points; ++i) {
    const double th = kTwoPi * i / points;
    grid.theta[i] = th;
    grid.f[i] = model.f(th);
    grid.g[i] = model.g(th);
  }
  return grid;
}

std::pair<double, double> ScanGrid::radicand_and_peak(const ExtremalParams& p, double bound) const {
  std::vector<double> control(theta.size()), rad(theta.size());
  kernels::clipped_control(f, g, {p.c, p.mu, bound}, control, rad);
  double min_rad = std::numeric_limits<double>::infinity(), peak = 0.0;
  for (std::size_t i = 0; i < rad.size(); ++i) {
    min_rad = std::min(min_rad, rad[i]);
    peak = std::max(peak, std::abs(control[i]));
  }
  return {min_rad, peak};
}

double radicand(const PhaseModel& model, const ExtremalParams& p, double theta) {
  const double f = model.f(theta), g = model.g(theta);
  return f * (f - g * p.mu) - g * g * p.c;
}

double eval_unbounded_control(const PhaseModel& model, const ExtremalParams& p, double theta) {
  const double f = model.f(theta), g = model.g(theta);
  const double rad = f * (f - g * p.mu) - g * g * p.c;
  if (rad < 0.0) throw Error(ErrorCode::InfeasiblePhase, "negative radicand at theta = " + std::to_string(theta));
  if (std::abs(g) < singular_prc_threshold(model)) return -0.5 * p.mu - g * p.c / (2.0 * f);
  return clipped_extremal_control(f, g, p.c, p.mu, kUnbounded);
}

double eval_costate(const PhaseModel& model, const ExtremalParams& p, double theta) {
  const double f = model.f(theta), g = model.g(theta);
  const double rad = f * (f - g * p.mu) - g * g * p.c;
  if (rad < 0.0) throw Error(ErrorCode::InfeasiblePhase, "negative radicand at theta = " + std::to_string(theta));
  if (std::abs(g) < singular_prc_threshold(model))
    throw Error(ErrorCode::NearZeroPrc, "costate undefined where the PRC vanishes");
  const double s = std::sqrt(rad);
  if (f > 0.0) return (-p.mu + 2.0 * (p.mu * f + g * p.c) / (f + s)) / g;
  return (-p.mu * g + 2.0 * f - 2.0 * s) / (g * g);
}

double hamiltonian(const PhaseModel& model, const ExtremalParams& p, double theta, double control,
                   double costate) {
  return p.lambda0 * control * control + costate * (model.f(theta) + model.g(theta) * control) + p.mu * control;
}

double check_feasible(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts) {
  const ScanGrid grid = ScanGrid::build(model, opts.scan_points);
  const double min_rad = grid.radicand_and_peak(p, kUnbounded).first;
  if (!(min_rad >= margin(model, opts)))
    throw Error(ErrorCode::InfeasibleParams, "phase velocity not real and positive (min radicand " +
                                                 std::to_string(min_rad) + ")");
  return min_rad;
}

ArcIntegrals integrate_arcs(const PhaseModel& model, const ExtremalParams& p, double bound,
                            const std::vector<Arc>& arcs, const QuadratureSpec& quad) {
  ArcIntegrals out;
  out.min_radicand = std::numeric_limits<double>::infinity();
  out.min_rate = std::numeric_limits<double>::infinity();
  std::vector<double> f, g;
  for (const Arc& arc : arcs) {
    if (arc.length() <= 0.0) continue;
    const NodeSet nodes = composite_gauss(arc.begin, arc.end, panels_for(arc.length(), quad), quad.points_per_panel);
    f.resize(nodes.size());
    g.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      f[i] = model.f(nodes.x[i]);
      g[i] = model.g(nodes.x[i]);
    }
    const kernels::ExtremalMoments m = kernels::extremal_moments(f, g, nodes.w, {p.c, p.mu, bound});
    out.time += m.time;
    out.charge += m.charge;
    out.cost += m.cost;
    if (arc.kind == ArcKind::Interior) out.min_radicand = std::min(out.min_radicand, m.min_radicand);
    out.min_rate = std::min(out.min_rate, m.min_rate);
  }
  return out;
}

double spiking_time(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts) {
  check_feasible(model, p, opts);
  return refined_integrals(model, p, kUnbounded, whole_cycle(), opts.quad).time;
}

double net_charge(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts) {
  check_feasible(model, p, opts);
  return refined_integrals(model, p, kUnbounded, whole_cycle(), opts.quad).charge;
}

bool has_odd_prc(const PhaseModel& model) {
  if (!model.constant_rate()) return false;
  const double tol = 1e-12 * model.prc_amplitude();
  for (int k = 1; k < 512; ++k) {
    const double th = kTwoPi * (k + 0.37) / 1024.0;
    if (std::abs(model.g(th) + model.g(kTwoPi - th)) > tol) return false;
  }
  return true;
}

double max_feasible_c(const PhaseModel& model, double mu, const SolverOptions& opts) {
  // radicand = g^2 (limit(theta) - c) with limit = (f^2 - g mu f) / g^2.
  const auto limit = [&](double th) {
    const double f = model.f(th), g = model.g(th);
    if (std::abs(g) < 1e-300) return std::numeric_limits<double>::infinity();
    return f * (f - g * mu) / (g * g);
  };
  const int n = opts.scan_points;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double v = limit(kTwoPi * i / n);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (!std::isfinite(best_val)) return best_val;
  const double h = kTwoPi / n;
  const double center = kTwoPi * best / n;
  const auto [x, fx] = boost::math::tools::brent_find_minima(limit, center - h, center + h, 52);
  (void)x;
  return std::min(best_val, fx);
}

double peak_control(const PhaseModel& model, const ExtremalParams& p, const SolverOptions& opts) {
  return ScanGrid::build(model, opts.scan_points).radicand_and_peak(p, kUnbounded).second;
}

namespace {

struct ExtremalProblem {
  const PhaseModel& model;
  const SolverOptions& opts;
  ScanGrid grid;
  double target;
  double delta;
  double current_scale;

  ExtremalProblem(const PhaseModel& m, const SolverOptions& o, double T)
      : model(m), opts(o), grid(ScanGrid::build(m, o.scan_points)), target(T), delta(margin(m, o)),
        current_scale(m.rate_scale() / m.prc_amplitude()) {}

  bool feasible(const ExtremalParams& p) const {
    return grid.radicand_and_peak(p, kUnbounded).first >= delta;
  }

  // NaN outside the feasible set.
  ArcIntegrals integrals(const ExtremalParams& p, const QuadratureSpec& quad) const {
    if (!feasible(p)) return {kNaN, kNaN, kNaN, kNaN, kNaN};
    return integrate_arcs(model, p, kUnbounded, whole_cycle(), quad);
  }

  detail::MomentFn moments(const QuadratureSpec& quad) const {
    return [this, &quad](double c, double mu) {
      const ArcIntegrals r = integrals({c, mu}, quad);
      return detail::Moments{r.time, r.charge};
    };
  }

  double solve_c(double mu, const QuadratureSpec& quad) const {
    const double c_max = max_feasible_c(model, mu, opts);
    if (!std::isfinite(c_max)) throw Error(ErrorCode::Infeasible, "model is not controllable");
    return detail::solve_c_for_time(moments(quad), mu, target, c_max - std::max(1.0, std::abs(c_max)));
  }

  ExtremalParams solve_balanced(double c0, const QuadratureSpec& quad) const {
    const detail::Constants k = detail::solve_time_and_charge(moments(quad), target, c0, 0.25 * current_scale);
    return {k.c, k.mu, 1.0, true};
  }
};

}  // namespace

namespace {

struct SolvedParams {
  ExtremalParams params;
  QuadratureSpec quad;
};

SolvedParams solve_params(const PhaseModel& model, double target_T, bool charge_balanced,
                          const SolverOptions& opts) {
  if (!(target_T > 0.0) || !std::isfinite(target_T))
    throw Error(ErrorCode::BadParameter, "target spiking time must be positive");
  opts.quad.validate();
  if (!(model.prc_amplitude() > 0.0)) throw Error(ErrorCode::Infeasible, "PRC vanishes identically");

  const ExtremalProblem problem(model, opts, target_T);
  const bool fix_mu = !charge_balanced || has_odd_prc(model);

  ExtremalParams params;
  QuadratureSpec quad = opts.quad;
  for (int round = 0; round < 5; ++round) {
    const double c0 = problem.solve_c(0.0, quad);
    params = fix_mu ? ExtremalParams{c0, 0.0, 1.0, charge_balanced} : problem.solve_balanced(c0, quad);
    // Accept once a finer rule agrees with the one the root was found on.
    QuadratureSpec finer = quad;
    finer.panels *= 2;
    const ArcIntegrals check = integrate_arcs(model, params, kUnbounded, whole_cycle(), finer);
    if (std::abs(check.time - target_T) <= std::max(quad.abs_tol, 1e-11 * target_T)) break;
    quad = finer;
  }
  return {params, quad};
}

}  // namespace

ExtremalParams solve_extremal_params(const PhaseModel& model, double target_T, bool charge_balanced,
                                     const SolverOptions& opts) {
  return solve_params(model, target_T, charge_balanced, opts).params;
}

ExtremalSolution solve_extremal(const PhaseModel& model, double target_T, bool charge_balanced,
                                const SolverOptions& opts) {
  const auto [params, quad] = solve_params(model, target_T, charge_balanced, opts);
  ExtremalSolution sol;
  sol.model = model;
  sol.params = params;
  sol.bound = kUnbounded;
  sol.arcs = whole_cycle();
  sol.target_T = target_T;
  const ArcIntegrals r = refined_integrals(model, params, kUnbounded, sol.arcs, quad);
  if (!(r.min_radicand > 0.0)) throw Error(ErrorCode::Infeasible, "solution left the feasible set");
  sol.cost = r.cost;
  sol.net_charge = r.charge;
  sample_control(sol, opts.samples);
  return sol;
}

}  // namespace spikeopt
