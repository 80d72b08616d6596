#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spikeopt/numerics/interp.hpp"

namespace spikeopt {

enum class ModelKind { Sinusoidal, Sniper, Theta, Tabulated };

std::string_view to_string(ModelKind kind) noexcept;

/// Phase response curve sampled on a uniform grid over [0, 2*pi).
struct PrcTable {
  std::vector<double> theta;
  std::vector<double> z;
  double omega = 0.0;

  /// Uniform grid starting at 0 with at least 64 samples, omega > 0.
  /// Throws Error(NonUniformGrid) or Error(BadParameter).
  void validate() const;

  static PrcTable from_values(std::vector<double> z, double omega);
};

/// Phase-reduced oscillator theta' = f(theta) + g(theta) * I. Immutable.
class PhaseModel {
 public:
  ModelKind kind() const { return kind_; }

  double f(double theta) const;
  double g(double theta) const;
  double df(double theta) const;
  double dg(double theta) const;
  double d2f(double theta) const;
  double d2g(double theta) const;

  /// Natural frequency; NaN for a theta neuron that does not spike on its own.
  double omega() const { return omega_; }
  /// 2*pi/omega, or nullopt when f changes sign (no autonomous spiking).
  std::optional<double> natural_period() const;
  bool autonomous() const { return autonomous_; }
  /// f is the constant omega (sinusoidal, SNIPER, tabulated).
  bool constant_rate() const { return kind_ != ModelKind::Theta; }
  /// Frequency scale used for feasibility margins: omega, or max|f| when
  /// omega is undefined.
  double rate_scale() const;
  /// max |g| over a period.
  double prc_amplitude() const;

  double z_d() const { return z_d_; }
  double baseline_current() const { return baseline_; }
  const PrcTable* table() const { return table_.get(); }

  std::string describe() const;

 private:
  friend PhaseModel make_sinusoidal(double, double);
  friend PhaseModel make_sniper(double, double);
  friend PhaseModel make_theta(double);
  friend PhaseModel make_tabulated(const PrcTable&);

  ModelKind kind_ = ModelKind::Sinusoidal;
  double omega_ = 1.0;
  double z_d_ = 0.0;
  double baseline_ = 0.0;
  bool autonomous_ = true;
  std::shared_ptr<const PrcTable> table_;
  std::shared_ptr<const PeriodicCubic> spline_;
};

/// f = omega, g = z_d sin(theta). Throws Error(BadParameter) unless omega > 0, z_d != 0.
PhaseModel make_sinusoidal(double omega, double z_d);
/// f = omega, g = z_d (1 - cos(theta)).
PhaseModel make_sniper(double omega, double z_d);
/// f = 1 + cos(theta) + (1 - cos(theta)) I_b, g = 1 - cos(theta).
PhaseModel make_theta(double baseline_current);
/// f = table.omega, g = periodic cubic through the table.
PhaseModel make_tabulated(const PrcTable& table);

/// PRC CSV: `# omega=<value>` line, then header `theta,Z`, then rows.
void write_prc_csv(std::ostream& os, const PrcTable& table);
PrcTable read_prc_csv(std::istream& is);
PrcTable read_prc_csv_file(const std::string& path);

}  // namespace spikeopt
