#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace spikeopt::cli {

enum ExitCode : int { kOk = 0, kInfeasible = 2, kNoConvergence = 3, kInvalidInput = 4 };

struct Sweep {
  double first = 0.0;
  double last = 0.0;
  int count = 1;

  std::vector<double> values() const;
};

/// Parses `T=a:b:n`. Throws Error(InvalidInput).
Sweep parse_sweep(const std::string& text);

struct RunConfig {
  std::string command;
  /// sinusoidal, sniper, theta, table, hh or ml.
  std::string model = "sinusoidal";
  double omega = 1.0;
  double zd = 1.0;
  double Ib = -0.25;
  std::string prc_path;
  std::string params_path;
  double T = std::numeric_limits<double>::quiet_NaN();
  double M = std::numeric_limits<double>::infinity();
  bool charge_balanced = false;
  std::string out = "spikeopt";

  int nodes = 150;
  int cycles = 10;
  int prc_samples = 1024;
  std::size_t samples = 4096;
  double nlp_tol = 1e-7;
  double ode_rtol = 1e-10;
  bool spike_triggered = false;

  std::optional<Sweep> sweep;
};

/// Executes one command; diagnostics go to `err`, results to `out` and the
/// files named by config.out. Never throws.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv with CLI11 and calls run().
int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spikeopt::cli
