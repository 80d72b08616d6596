#include "spikeopt/conductance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

#include "spikeopt/error.hpp"
#include "spikeopt/io.hpp"

namespace spikeopt {

std::string_view to_string(NeuronKind kind) noexcept {
  switch (kind) {
    case NeuronKind::HodgkinHuxley:
      return "hh";
    case NeuronKind::MorrisLecar:
      return "ml";
  }
  return "?";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// k x / (1 - exp(-x/10)), which tends to 10 k (1 + x/20) as x -> 0.
double linear_over_exp(double k, double x) {
  const double den = -std::expm1(-x / 10.0);
  if (std::abs(den) < 1e-7) return 10.0 * k * (1.0 + x / 20.0);
  return k * x / den;
}

struct NamedParam {
  std::string_view name;
  double HodgkinHuxleyParams::*hh = nullptr;
  double MorrisLecarParams::*ml = nullptr;
};

constexpr NamedParam kHhParams[] = {
    {"V_Na", &HodgkinHuxleyParams::V_Na}, {"V_k", &HodgkinHuxleyParams::V_k},
    {"V_L", &HodgkinHuxleyParams::V_L},   {"g_Na", &HodgkinHuxleyParams::g_Na},
    {"g_k", &HodgkinHuxleyParams::g_k},   {"g_L", &HodgkinHuxleyParams::g_L},
    {"C", &HodgkinHuxleyParams::C},       {"I", &HodgkinHuxleyParams::I},
};

constexpr NamedParam kMlParams[] = {
    {"phi", nullptr, &MorrisLecarParams::phi}, {"I_b", nullptr, &MorrisLecarParams::I_b},
    {"V_1", nullptr, &MorrisLecarParams::V_1}, {"V_2", nullptr, &MorrisLecarParams::V_2},
    {"V_3", nullptr, &MorrisLecarParams::V_3}, {"V_4", nullptr, &MorrisLecarParams::V_4},
    {"g_Ca", nullptr, &MorrisLecarParams::g_Ca}, {"g_k", nullptr, &MorrisLecarParams::g_k},
    {"g_L", nullptr, &MorrisLecarParams::g_L}, {"V_Ca", nullptr, &MorrisLecarParams::V_Ca},
    {"V_k", nullptr, &MorrisLecarParams::V_k}, {"V_L", nullptr, &MorrisLecarParams::V_L},
    {"C", nullptr, &MorrisLecarParams::C},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

namespace hh {
double a_m(double V) { return linear_over_exp(0.1, V + 40.0); }
double b_m(double V) { return 4.0 * std::exp(-(V + 65.0) / 18.0); }
double a_h(double V) { return 0.07 * std::exp(-(V + 65.0) / 20.0); }
double b_h(double V) { return 1.0 / (1.0 + std::exp(-(V + 35.0) / 10.0)); }
double a_n(double V) { return linear_over_exp(0.01, V + 55.0); }
double b_n(double V) { return 0.125 * std::exp(-(V + 65.0) / 80.0); }
}  // namespace hh

namespace ml {
double m_inf(const MorrisLecarParams& p, double V) { return 0.5 * (1.0 + std::tanh((V - p.V_1) / p.V_2)); }
double w_inf(const MorrisLecarParams& p, double V) { return 0.5 * (1.0 + std::tanh((V - p.V_3) / p.V_4)); }
double tau_w(const MorrisLecarParams& p, double V) { return 1.0 / std::cosh((V - p.V_3) / (2.0 * p.V_4)); }
}  // namespace ml

ConductanceModel ConductanceModel::hodgkin_huxley(const HodgkinHuxleyParams& p) {
  ConductanceModel m;
  m.kind_ = NeuronKind::HodgkinHuxley;
  m.hh_ = p;
  m.spike_threshold_ = 0.0;
  if (!(p.C > 0.0)) throw Error(ErrorCode::InvalidInput, "capacitance must be positive");
  return m;
}

ConductanceModel ConductanceModel::morris_lecar(const MorrisLecarParams& p) {
  ConductanceModel m;
  m.kind_ = NeuronKind::MorrisLecar;
  m.ml_ = p;
  m.spike_threshold_ = 0.05;
  if (!(p.C > 0.0) || p.V_2 == 0.0 || p.V_4 == 0.0)
    throw Error(ErrorCode::InvalidInput, "C must be positive and V_2, V_4 nonzero");
  return m;
}

double ConductanceModel::capacitance() const { return kind_ == NeuronKind::HodgkinHuxley ? hh_.C : ml_.C; }

double ConductanceModel::baseline_current() const {
  return kind_ == NeuronKind::HodgkinHuxley ? hh_.I : ml_.I_b;
}

void ConductanceModel::rhs(std::span<const double> x, double I_ext, std::span<double> dx) const {
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteState, "state not finite");
  if (!std::isfinite(I_ext)) throw Error(ErrorCode::NonFiniteState, "external current not finite");
  if (kind_ == NeuronKind::HodgkinHuxley) {
    const auto& p = hh_;
    const double V = x[0], m = x[1], h = x[2], n = x[3];
    const double m3 = m * m * m, n4 = n * n * n * n;
    const double ionic = p.g_Na * h * m3 * (V - p.V_Na) + p.g_k * n4 * (V - p.V_k) + p.g_L * (V - p.V_L);
    dx[0] = (p.I + I_ext - ionic) / p.C;
    dx[1] = hh::a_m(V) * (1.0 - m) - hh::b_m(V) * m;
    dx[2] = hh::a_h(V) * (1.0 - h) - hh::b_h(V) * h;
    dx[3] = hh::a_n(V) * (1.0 - n) - hh::b_n(V) * n;
  } else {
    const auto& p = ml_;
    const double V = x[0], w = x[1];
    dx[0] = (p.I_b + I_ext + p.g_Ca * ml::m_inf(p, V) * (p.V_Ca - V) + p.g_k * w * (p.V_k - V) +
             p.g_L * (p.V_L - V)) / p.C;
    dx[1] = p.phi * (ml::w_inf(p, V) - w) / ml::tau_w(p, V);
  }
}

std::vector<double> ConductanceModel::rhs(const std::vector<double>& x, double I_ext) const {
  if (x.size() != dimension()) throw Error(ErrorCode::InvalidInput, "state has wrong dimension");
  std::vector<double> dx(x.size());
  rhs(std::span<const double>(x), I_ext, std::span<double>(dx));
  return dx;
}

std::vector<double> ConductanceModel::jacobian(std::span<const double> x, double I_ext) const {
  const std::size_t d = dimension();
  std::vector<double> J(d * d), xp(x.begin(), x.end()), xm(x.begin(), x.end()), fp(d), fm(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    rhs(xp, I_ext, fp);
    rhs(xm, I_ext, fm);
    for (std::size_t i = 0; i < d; ++i) J[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
    xp[j] = xm[j] = x[j];
  }
  return J;
}

std::vector<double> ConductanceModel::initial_state() const {
  if (kind_ == NeuronKind::HodgkinHuxley) return {-65.0, 0.05, 0.6, 0.32};
  return {0.0, 0.0};
}

void ConductanceModel::check_gating(std::span<const double> x, double tol) const {
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] >= -tol && x[i] <= 1.0 + tol))
      throw Error(ErrorCode::GatingOutOfBounds,
                  "gating variable " + std::to_string(i) + " = " + format_number(x[i]) + " left [0, 1]");
}

void ConductanceModel::set_param(std::string_view name, double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::InvalidInput, "parameter " + std::string(name) + " not finite");
  if (kind_ == NeuronKind::HodgkinHuxley) {
    for (const auto& p : kHhParams)
      if (p.name == name) {
        HodgkinHuxleyParams next = hh_;
        next.*(p.hh) = value;
        *this = hodgkin_huxley(next);
        return;
      }
  } else {
    for (const auto& p : kMlParams)
      if (p.name == name) {
        MorrisLecarParams next = ml_;
        next.*(p.ml) = value;
        const double thr = spike_threshold_;
        *this = morris_lecar(next);
        spike_threshold_ = thr;
        return;
      }
  }
  throw Error(ErrorCode::InvalidInput, "unknown parameter '" + std::string(name) + "' for " +
                                           std::string(to_string(kind_)));
}

double ConductanceModel::param(std::string_view name) const {
  if (kind_ == NeuronKind::HodgkinHuxley) {
    for (const auto& p : kHhParams)
      if (p.name == name) return hh_.*(p.hh);
  } else {
    for (const auto& p : kMlParams)
      if (p.name == name) return ml_.*(p.ml);
  }
  throw Error(ErrorCode::InvalidInput, "unknown parameter '" + std::string(name) + "'");
}

std::vector<std::string> ConductanceModel::param_names() const {
  std::vector<std::string> out;
  if (kind_ == NeuronKind::HodgkinHuxley)
    for (const auto& p : kHhParams) out.emplace_back(p.name);
  else
    for (const auto& p : kMlParams) out.emplace_back(p.name);
  return out;
}

std::string ConductanceModel::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(";
  const auto names = param_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    os << (i ? ", " : "") << names[i] << "=" << format_number(param(names[i]));
  os << ")";
  return os.str();
}

void apply_overrides(ConductanceModel& model, std::istream& is) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidInput, "override line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string val = trim(std::string_view(body).substr(eq + 1));
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size())
      throw Error(ErrorCode::InvalidInput, "override line " + std::to_string(lineno) + ": bad number '" + val + "'");
    if (key == "spike_threshold")
      model.set_spike_threshold(v);
    else
      model.set_param(key, v);
  }
}

void apply_overrides_file(ConductanceModel& model, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open parameter file " + path);
  apply_overrides(model, in);
}

std::vector<double> LimitCycle::state_at(double time) const {
  if (!orbit) throw Error(ErrorCode::BadParameter, "limit cycle has no orbit");
  double tw = std::fmod(time, period);
  if (tw < 0.0) tw += period;
  return orbit->state_at(tw);
}

double LimitCycle::closure_error() const {
  const std::vector<double> a = orbit->state_at(0.0), b = orbit->state_at(period);
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += a[i] * a[i];
  }
  return std::sqrt(diff) / std::max(1.0, std::sqrt(norm));
}

namespace {

OdeRhs free_rhs(const ConductanceModel& model) {
  return [&model](double, std::span<const double> y, std::span<double> dy) { model.rhs(y, 0.0, dy); };
}

StepObserver gating_guard(const ConductanceModel& model) {
  return [&model](double, std::span<const double> y) {
    model.check_gating(y, 1e-6);
    return true;
  };
}

// First upward marker crossing after `after`.
double next_spike(const OdeSolution& sol, const ConductanceModel& model, double after) {
  for (double t : sol.crossings(0, model.spike_threshold(), +1))
    if (t > after) return t;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

LimitCycle find_limit_cycle(const ConductanceModel& model, const CycleOptions& opts) {
  const OdeRhs rhs = free_rhs(model);
  const StepObserver guard = gating_guard(model);

  const OdeSolution probe = integrate_ode(rhs, model.initial_state(), 0.0, opts.probe_time, opts.ode, guard);
  const std::vector<double> ups = probe.crossings(0, model.spike_threshold(), +1);
  if (ups.size() < 3)
    throw Error(ErrorCode::NoOscillation, "fewer than three spikes in " + format_number(opts.probe_time) + " ms");
  double P = ups.back() - ups[ups.size() - 2];

  const OdeSolution transient =
      integrate_ode(rhs, probe.state_at(ups.back()), 0.0, opts.transient_periods * P, opts.ode, guard);
  const std::vector<double> late = transient.crossings(0, model.spike_threshold(), +1);
  if (late.size() + 2 < static_cast<std::size_t>(opts.transient_periods))
    throw Error(ErrorCode::NoOscillation, "spiking died out during the transient");
  std::vector<double> x = transient.state_at(late.back());

  // Return map on the marker section until the crossing state is stationary.
  bool settled = false;
  for (int k = 0; k < opts.max_returns && !settled; ++k) {
    const OdeSolution seg = integrate_ode(rhs, x, 0.0, 1.5 * P, opts.ode, guard);
    const double t_next = next_spike(seg, model, 0.5 * P);
    if (!std::isfinite(t_next)) throw Error(ErrorCode::NoOscillation, "no return to the spike section");
    const std::vector<double> x_next = seg.state_at(t_next);
    double diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(x_next[i] - x[i]) / (1.0 + std::abs(x[i])));
    settled = diff < opts.return_tol;
    P = t_next;
    x = x_next;
  }

  auto orbit = std::make_shared<OdeSolution>(integrate_ode(rhs, x, 0.0, 1.05 * P, opts.ode, guard));
  LimitCycle cycle;
  cycle.period = next_spike(*orbit, model, 0.5 * P);
  if (!std::isfinite(cycle.period)) throw Error(ErrorCode::NoOscillation, "orbit did not return");
  cycle.omega = kTwoPi / cycle.period;
  cycle.orbit = orbit;
  if (!(cycle.closure_error() < opts.closure_tol))
    throw Error(ErrorCode::NoConvergence, "limit cycle did not close (error " + format_number(cycle.closure_error()) + ")");

  const std::size_t n = std::max<std::size_t>(opts.samples, 2);
  cycle.t.resize(n);
  cycle.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    cycle.t[k] = cycle.period * static_cast<double>(k) / static_cast<double>(n);
    cycle.samples[k] = orbit->state_at(cycle.t[k]);
  }
  return cycle;
}

AdjointPrc compute_adjoint_prc(const ConductanceModel& model, const LimitCycle& cycle, std::size_t n_samples,
                               const PrcOptions& opts) {
  if (!cycle.orbit || !(cycle.period > 0.0)) throw Error(ErrorCode::BadParameter, "invalid limit cycle");
  if (n_samples < 64) throw Error(ErrorCode::BadParameter, "PRC needs at least 64 samples");
  const std::size_t d = model.dimension();
  const double P = cycle.period, omega = kTwoPi / P;

  const OdeRhs adjoint = [&](double t, std::span<const double> z, std::span<double> dz) {
    const std::vector<double> x = cycle.orbit->state_at(std::clamp(t, 0.0, P));
    const std::vector<double> J = model.jacobian(x);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += J[j * d + i] * z[j];
      dz[i] = -s;
    }
  };
  const std::vector<double> F0 = model.rhs(cycle.orbit->state_at(0.0), 0.0);
  auto normalize = [&](std::vector<double>& z) {
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += z[i] * F0[i];
    if (!(std::abs(dot) > 0.0)) throw Error(ErrorCode::AdjointNoConvergence, "adjoint orthogonal to the flow");
    for (double& v : z) v *= omega / dot;
  };

  OdeConfig cfg = opts.ode;
  cfg.dense_output = false;
  std::vector<double> z(d, 0.0);
  z[0] = 1.0;
  normalize(z);
  int rounds = 0;
  bool periodic = false;
  while (rounds < opts.max_rounds && !periodic) {
    ++rounds;
    const OdeSolution back = integrate_ode(adjoint, z, P, 0.0, cfg);
    std::vector<double> z0(back.final_state().begin(), back.final_state().end());
    normalize(z0);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      diff = std::max(diff, std::abs(z0[i] - z[i]));
      norm = std::max(norm, std::abs(z0[i]));
    }
    periodic = diff <= opts.periodic_tol * norm;
    z = z0;
  }
  if (!periodic) throw Error(ErrorCode::AdjointNoConvergence, "adjoint not periodic after relaxation");

  cfg.dense_output = true;
  const OdeSolution back = integrate_ode(adjoint, z, P, 0.0, cfg);
  AdjointPrc out;
  out.rounds = rounds;
  std::vector<double> zv(n_samples);
  out.adjoint.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = P * static_cast<double>(k) / static_cast<double>(n_samples);
    out.adjoint[k] = back.state_at(t);
    const std::vector<double> F = model.rhs(cycle.orbit->state_at(t), 0.0);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += out.adjoint[k][i] * F[i];
    out.normalization_error = std::max(out.normalization_error, std::abs(dot - omega) / omega);
    zv[k] = out.adjoint[k][0] / model.capacitance();
  }
  if (!(out.normalization_error < 1e-6))
    throw Error(ErrorCode::AdjointNoConvergence,
                "normalization drifted by " + format_number(out.normalization_error) + " relative");
  out.table = PrcTable::from_values(std::move(zv), omega);
  return out;
}

PrcTable compute_prc(const ConductanceModel& model, const LimitCycle& cycle, std::size_t n_samples,
                     const PrcOptions& opts) {
  return compute_adjoint_prc(model, cycle, n_samples, opts).table;
}

double direct_phase_shift(const ConductanceModel& model, const LimitCycle& cycle, double theta, double eps,
                          int settle_periods) {
  const double P = cycle.period;
  const double t0 = std::fmod(theta, kTwoPi) / cycle.omega;
  const double horizon = (settle_periods + 0.5) * P;
  OdeConfig cfg{1e-12, 1e-13};
  const OdeRhs rhs = free_rhs(model);

  // Reference and kicked runs share the integrator so its bias cancels.
  auto spike_near = [&](std::vector<double> x) {
    const OdeSolution sol = integrate_ode(rhs, std::move(x), t0, horizon, cfg);
    return next_spike(sol, model, (settle_periods - 0.5) * P);
  };
  std::vector<double> x = cycle.state_at(t0);
  const double t_ref = spike_near(x);
  x[0] += eps / model.capacitance();
  const double t_kick = spike_near(x);
  if (!std::isfinite(t_ref) || !std::isfinite(t_kick))
    throw Error(ErrorCode::NoOscillation, "no spike after the kick");
  return cycle.omega * (t_ref - t_kick);
}

}  // namespace spikeopt
