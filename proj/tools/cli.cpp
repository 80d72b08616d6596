#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikeopt/bounded.hpp"
#include "spikeopt/collocation.hpp"
#include "spikeopt/conductance.hpp"
#include "spikeopt/error.hpp"
#include "spikeopt/extremal.hpp"
#include "spikeopt/io.hpp"
#include "spikeopt/phase_model.hpp"
#include "spikeopt/validation.hpp"

namespace spikeopt::cli {

using json = nlohmann::ordered_json;

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange:
    case ErrorCode::Infeasible:
    case ErrorCode::InfeasibleParams:
    case ErrorCode::InfeasiblePhase:
    case ErrorCode::BangInfeasible:
      return kInfeasible;
    case ErrorCode::NoConvergence:
    case ErrorCode::AdjointNoConvergence:
    case ErrorCode::SingularJacobian:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NonFiniteState:
    case ErrorCode::NonFiniteIntegrand:
      return kNoConvergence;
    default:
      return kInvalidInput;
  }
}

json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return round_sig12(v);
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

bool is_conductance(const RunConfig& c) { return c.model == "hh" || c.model == "ml"; }

json config_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["model"] = c.model;
  if (c.model == "sinusoidal" || c.model == "sniper") {
    j["omega"] = num(c.omega);
    j["zd"] = num(c.zd);
  }
  if (c.model == "theta") j["Ib"] = num(c.Ib);
  if (c.model == "table") j["prc"] = c.prc_path;
  if (is_conductance(c)) {
    j["params"] = c.params_path;
    j["prc_samples"] = c.prc_samples;
  }
  j["T"] = num(c.T);
  j["M"] = num(c.M);
  j["charge_balanced"] = c.charge_balanced;
  if (c.command == "direct") {
    j["nodes"] = c.nodes;
    j["nlp_tol"] = num(c.nlp_tol);
  }
  if (c.command == "validate") {
    j["cycles"] = c.cycles;
    j["ode_rtol"] = num(c.ode_rtol);
    j["spike_triggered"] = c.spike_triggered;
  }
  if (c.command == "solve") j["samples"] = c.samples;
  j["out"] = c.out;
  return j;
}

ConductanceModel conductance_of(const RunConfig& c) {
  ConductanceModel m = c.model == "hh" ? ConductanceModel::hodgkin_huxley() : ConductanceModel::morris_lecar();
  if (!c.params_path.empty()) apply_overrides_file(m, c.params_path);
  return m;
}

PhaseModel phase_model_of(const RunConfig& c) {
  if (c.model == "sinusoidal") return make_sinusoidal(c.omega, c.zd);
  if (c.model == "sniper") return make_sniper(c.omega, c.zd);
  if (c.model == "theta") return make_theta(c.Ib);
  if (c.model == "table") {
    if (c.prc_path.empty()) throw Error(ErrorCode::InvalidInput, "--model table needs --prc");
    return make_tabulated(read_prc_csv_file(c.prc_path));
  }
  if (is_conductance(c)) {
    const ConductanceModel m = conductance_of(c);
    return make_tabulated(compute_prc(m, find_limit_cycle(m), static_cast<std::size_t>(c.prc_samples)));
  }
  throw Error(ErrorCode::InvalidInput, "unknown model '" + c.model + "'");
}

void require_T(const RunConfig& c) {
  if (!(c.T > 0.0) || !std::isfinite(c.T)) throw Error(ErrorCode::InvalidInput, c.command + " needs --T > 0");
}

void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json arcs_json(const std::vector<Arc>& arcs) {
  json a = json::array();
  for (const Arc& arc : arcs)
    a.push_back({{"kind", std::string(to_string(arc.kind))}, {"begin", num(arc.begin)}, {"end", num(arc.end)}});
  return a;
}

int cmd_solve(const RunConfig& c, const PhaseModel& model, std::ostream& out) {
  require_T(c);
  SolverOptions opts;
  opts.samples = c.samples;
  ControlSolution sol;
  json extra;
  if (std::isinf(c.M)) {
    sol = solve_extremal(model, c.T, c.charge_balanced, opts);
  } else {
    BoundedSolution b = solve_bounded(model, c.T, c.M, c.charge_balanced, opts);
    extra["switch_count"] = b.policy.switch_count();
    extra["warnings"] = b.policy.warnings;
    sol = std::move(b.control);
  }
  json j;
  j["config"] = config_json(c);
  j["c"] = num(sol.params.c);
  j["mu"] = num(sol.params.mu);
  j["cost"] = num(sol.cost);
  j["net_charge"] = num(sol.net_charge);
  j["achieved_T"] = num(sol.achieved_T);
  j["arcs"] = arcs_json(sol.arcs);
  j["switch_phases"] = nums(sol.switch_phases);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(c.out + ".json", j);

  std::ostringstream csv;
  csv << "t,theta,I,p\n";
  for (std::size_t k = 0; k < sol.t.size(); ++k)
    csv << format_number(sol.t[k]) << ',' << format_number(sol.theta[k]) << ',' << format_number(sol.control[k])
        << ',' << format_number(sol.charge[k]) << '\n';
  write_file_atomic(c.out + ".csv", csv.str());
  out << "cost " << format_number(sol.cost) << ", net charge " << format_number(sol.net_charge) << ", wrote "
      << c.out << ".json and " << c.out << ".csv\n";
  return kOk;
}

int cmd_range(const RunConfig& c, const PhaseModel& model, std::ostream& out) {
  if (!(c.M > 0.0) || std::isinf(c.M)) throw Error(ErrorCode::InvalidInput, "range needs a finite --M > 0");
  const FeasibleRange r = feasible_range(model, c.M, c.charge_balanced);
  out << "T_min_M " << format_number(r.T_min_M) << '\n';
  out << "T_max_M " << (std::isinf(r.T_max_M) ? std::string("unbounded above") : format_number(r.T_max_M)) << '\n';
  out << "T_Istar_min " << format_number(r.T_Istar_min) << '\n';
  out << "T_Istar_max "
      << (std::isinf(r.T_Istar_max) ? std::string("unbounded above") : format_number(r.T_Istar_max)) << '\n';
  return kOk;
}

int cmd_prc(const RunConfig& c, std::ostream& out) {
  if (!is_conductance(c)) throw Error(ErrorCode::InvalidInput, "prc needs --model hh or ml");
  const ConductanceModel m = conductance_of(c);
  const LimitCycle cycle = find_limit_cycle(m);
  const AdjointPrc prc = compute_adjoint_prc(m, cycle, static_cast<std::size_t>(c.prc_samples));
  std::ostringstream csv;
  write_prc_csv(csv, prc.table);
  write_file_atomic(c.out + ".csv", csv.str());
  out << "period " << format_number(cycle.period) << ", omega " << format_number(cycle.omega)
      << ", normalization error " << format_number(prc.normalization_error) << ", wrote " << c.out << ".csv\n";
  return kOk;
}

int cmd_direct(const RunConfig& c, const PhaseModel& model, std::ostream& out) {
  require_T(c);
  NlpOptions opts;
  opts.tol = c.nlp_tol;
  const DirectSolution d = solve_direct(model, c.T, c.M, c.charge_balanced, c.nodes, opts);
  std::ostringstream csv;
  csv << "tau,t,theta,I,p\n";
  for (std::size_t i = 0; i < d.t.size(); ++i)
    csv << format_number(d.tau[i]) << ',' << format_number(d.t[i]) << ',' << format_number(d.theta[i]) << ','
        << format_number(d.control[i]) << ',' << format_number(d.p[i]) << '\n';
  write_file_atomic(c.out + ".csv", csv.str());
  json j;
  j["config"] = config_json(c);
  j["objective"] = num(d.objective());
  j["converged"] = d.nlp.converged;
  j["constraint_violation"] = num(d.nlp.constraint_violation);
  j["stationarity"] = num(d.nlp.stationarity);
  j["outer_rounds"] = d.nlp.outer_rounds;
  j["inner_iterations"] = d.nlp.inner_iterations;
  j["warm_started"] = d.warm_started;
  write_json(c.out + ".json", j);
  out << "objective " << format_number(d.objective()) << ", wrote " << c.out << ".json and " << c.out << ".csv\n";
  return kOk;
}

int cmd_validate(const RunConfig& c, std::ostream& out) {
  if (!is_conductance(c)) throw Error(ErrorCode::InvalidInput, "validate needs --model hh or ml");
  require_T(c);
  if (c.cycles < 1) throw Error(ErrorCode::InvalidInput, "--cycles must be at least 1");
  const ConductanceModel m = conductance_of(c);
  const LimitCycle cycle = find_limit_cycle(m);
  const PhaseModel model = make_tabulated(compute_prc(m, cycle, static_cast<std::size_t>(c.prc_samples)));
  const ControlSolution design = std::isinf(c.M) ? solve_extremal(model, c.T, c.charge_balanced)
                                                 : solve_bounded(model, c.T, c.M, c.charge_balanced).control;
  FullSimOptions opts;
  opts.ode.rel_tol = c.ode_rtol;
  opts.ode.abs_tol = 1e-2 * c.ode_rtol;
  opts.spike_triggered = c.spike_triggered;
  opts.breakpoints = switch_times(design);
  const SpikeTrainReport rep = simulate_full(m, cycle, control_function(design), c.T, c.cycles, opts);

  json j = json::parse(report_json(rep));
  j["config"] = config_json(c);
  j["natural_period"] = num(cycle.period);
  j["design_cost"] = num(design.cost);
  write_json(c.out + ".json", j);
  write_file_atomic(c.out + "_trace.csv", trace_csv(rep));
  out << "mean interval " << format_number(rep.mean_interval) << " over " << rep.inter_spike_intervals.size()
      << " intervals, wrote " << c.out << ".json and " << c.out << "_trace.csv\n";
  return kOk;
}

int dispatch(const RunConfig& c, const std::optional<PhaseModel>& model, std::ostream& out) {
  if (c.command == "solve") return cmd_solve(c, *model, out);
  if (c.command == "range") return cmd_range(c, *model, out);
  if (c.command == "direct") return cmd_direct(c, *model, out);
  if (c.command == "prc") return cmd_prc(c, out);
  if (c.command == "validate") return cmd_validate(c, out);
  throw Error(ErrorCode::InvalidInput, "unknown command '" + c.command + "'");
}

template <class F>
int guarded(F&& f, std::ostream& err) {
  try {
    return f();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPIKEOPT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, jobs));
}

}  // namespace

std::vector<double> Sweep::values() const {
  std::vector<double> v;
  for (int i = 0; i < count; ++i)
    v.push_back(count == 1 ? first : first + (last - first) * static_cast<double>(i) / (count - 1));
  return v;
}

Sweep parse_sweep(const std::string& text) {
  const auto bad = [&] { return Error(ErrorCode::InvalidInput, "sweep must look like T=a:b:n, got '" + text + "'"); };
  if (text.rfind("T=", 0) != 0) throw bad();
  std::istringstream is(text.substr(2));
  Sweep s;
  char c1 = 0, c2 = 0;
  if (!(is >> s.first >> c1 >> s.last >> c2 >> s.count) || c1 != ':' || c2 != ':' || !is.eof()) throw bad();
  if (s.count < 1 || !(s.first > 0.0) || !(s.last > 0.0)) throw bad();
  return s;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(
      [&]() -> int {
        if (config.command != "prc" && config.command != "validate" && !(config.M > 0.0))
          throw Error(ErrorCode::InvalidInput, "--M must be positive or inf");
        if (!config.prc_path.empty() && !std::filesystem::exists(config.prc_path))
          throw Error(ErrorCode::InvalidInput, "no such file " + config.prc_path);
        if (!config.params_path.empty() && !std::filesystem::exists(config.params_path))
          throw Error(ErrorCode::InvalidInput, "no such file " + config.params_path);

        std::optional<PhaseModel> model;
        if (config.command == "solve" || config.command == "range" || config.command == "direct")
          model = phase_model_of(config);
        if (!config.sweep) return dispatch(config, model, out);

        if (config.command != "solve" && config.command != "direct" && config.command != "validate")
          throw Error(ErrorCode::InvalidInput, "--sweep applies to solve, direct and validate");
        const std::vector<double> Ts = config.sweep->values();
        std::vector<int> codes(Ts.size(), kOk);
        std::vector<std::ostringstream> outs(Ts.size()), errs(Ts.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
          for (std::size_t i = next++; i < Ts.size(); i = next++) {
            RunConfig item = config;
            item.sweep.reset();
            item.T = Ts[i];
            item.out = config.out + "_" + std::to_string(i);
            codes[i] = guarded([&] { return dispatch(item, model, outs[i]); }, errs[i]);
          }
        };
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < worker_count(Ts.size()); ++k) pool.emplace_back(worker);
        pool.clear();

        int code = kOk;
        for (std::size_t i = 0; i < Ts.size(); ++i) {
          out << "[" << i << "] T=" << format_number(Ts[i]) << ": " << outs[i].str();
          err << errs[i].str();
          code = std::max(code, codes[i]);
        }
        return code;
      },
      err);
}

int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimum-power, charge-balanced spike timing controls for phase oscillators"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string M_text = "inf";
  std::string sweep_text;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model, "sinusoidal, sniper, theta, table, hh or ml")
        ->check(CLI::IsMember({"sinusoidal", "sniper", "theta", "table", "hh", "ml"}));
    sub->add_option("--omega", cfg.omega, "natural frequency (sinusoidal, sniper)");
    sub->add_option("--zd", cfg.zd, "PRC amplitude (sinusoidal, sniper)");
    sub->add_option("--Ib", cfg.Ib, "baseline current (theta)");
    sub->add_option("--prc", cfg.prc_path, "PRC table CSV (table)");
    sub->add_option("--params", cfg.params_path, "key=value parameter overrides (hh, ml)");
    sub->add_option("--prc-samples", cfg.prc_samples, "PRC samples for hh and ml");
    sub->add_option("--M", M_text, "control bound, or inf");
    sub->add_flag("--charge-balanced", cfg.charge_balanced, "require zero net charge");
    sub->add_option("--out", cfg.out, "output path prefix");
  };
  auto add_T = [&](CLI::App* sub) {
    sub->add_option("--T", cfg.T, "target spiking period");
    sub->add_option("--sweep", sweep_text, "T=a:b:n, solved concurrently");
  };

  CLI::App* solve = app.add_subcommand("solve", "indirect optimal control");
  add_model(solve);
  add_T(solve);
  solve->add_option("--samples", cfg.samples, "time samples in the CSV");
  CLI::App* range = app.add_subcommand("range", "feasible spiking periods under a bound");
  add_model(range);
  CLI::App* prc = app.add_subcommand("prc", "adjoint PRC of a conductance model");
  add_model(prc);
  CLI::App* direct = app.add_subcommand("direct", "pseudospectral direct solution");
  add_model(direct);
  add_T(direct);
  direct->add_option("--N", cfg.nodes, "polynomial degree");
  direct->add_option("--tol", cfg.nlp_tol, "KKT tolerance");
  CLI::App* validate = app.add_subcommand("validate", "apply a phase-model design to the full model");
  add_model(validate);
  add_T(validate);
  validate->add_option("--cycles", cfg.cycles, "control repetitions");
  validate->add_option("--rtol", cfg.ode_rtol, "integrator relative tolerance");
  validate->add_flag("--spike-triggered", cfg.spike_triggered, "restart the control at each spike");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return guarded(
      [&] {
        if (M_text == "inf") {
          cfg.M = std::numeric_limits<double>::infinity();
        } else {
          std::size_t used = 0;
          try {
            cfg.M = std::stod(M_text, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used != M_text.size()) throw Error(ErrorCode::InvalidInput, "--M must be a number or inf");
        }
        if (!sweep_text.empty()) cfg.sweep = parse_sweep(sweep_text);
        return run(cfg, out, err);
      },
      err);
}

}  // namespace spikeopt::cli
