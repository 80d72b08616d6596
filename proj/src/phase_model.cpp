#include "spikeopt/phase_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "spikeopt/error.hpp"
#include "spikeopt/io.hpp"

namespace spikeopt {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Sinusoidal: return "sinusoidal";
    case ModelKind::Sniper: return "sniper";
    case ModelKind::Theta: return "theta";
    case ModelKind::Tabulated: return "tabulated";
  }
  return "unknown";
}

void PrcTable::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw Error(ErrorCode::BadParameter, "PRC table omega must be positive");
  if (theta.size() != z.size()) throw Error(ErrorCode::BadParameter, "PRC table columns differ in length");
  if (theta.size() < 64) throw Error(ErrorCode::NonUniformGrid, "PRC table needs at least 64 samples");
  const double h = kTwoPi / static_cast<double>(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (std::abs(theta[i] - h * static_cast<double>(i)) > 1e-9 * (1.0 + h * static_cast<double>(i)))
      throw Error(ErrorCode::NonUniformGrid, "PRC phases must be uniform on [0, 2*pi)");
    if (!std::isfinite(z[i])) throw Error(ErrorCode::BadParameter, "PRC value not finite");
  }
}

PrcTable PrcTable::from_values(std::vector<double> z, double omega) {
  PrcTable t;
  t.theta.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) t.theta[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(z.size());
  t.z = std::move(z);
  t.omega = omega;
  return t;
}

double PhaseModel::f(double theta) const {
  if (kind_ == ModelKind::Theta) {
    const double c = std::cos(theta);
    return 1.0 + c + (1.0 - c) * baseline_;
  }
  return omega_;
}

double PhaseModel::g(double theta) const {
  switch (kind_) {
    case ModelKind::Sinusoidal: return z_d_ * std::sin(theta);
    case ModelKind::Sniper: return z_d_ * (1.0 - std::cos(theta));
    case ModelKind::Theta: return 1.0 - std::cos(theta);
    case ModelKind::Tabulated: return (*spline_)(theta);
  }
  return 0.0;
}

double PhaseModel::df(double theta) const {
  return kind_ == ModelKind::Theta ? -std::sin(theta) * (1.0 - baseline_) : 0.0;
}

double PhaseModel::dg(double theta) const {
  switch (kind_) {
    case ModelKind::Sinusoidal: return z_d_ * std::cos(theta);
    case ModelKind::Sniper: return z_d_ * std::sin(theta);
    case ModelKind::Theta: return std::sin(theta);
    case ModelKind::Tabulated: return spline_->derivative(theta);
  }
  return 0.0;
}

double PhaseModel::d2f(double theta) const {
  return kind_ == ModelKind::Theta ? -std::cos(theta) * (1.0 - baseline_) : 0.0;
}

double PhaseModel::d2g(double theta) const {
  switch (kind_) {
    case ModelKind::Sinusoidal: return -z_d_ * std::sin(theta);
    case ModelKind::Sniper: return z_d_ * std::cos(theta);
    case ModelKind::Theta: return std::cos(theta);
    case ModelKind::Tabulated: return spline_->second_derivative(theta);
  }
  return 0.0;
}

std::optional<double> PhaseModel::natural_period() const {
  if (!autonomous_) return std::nullopt;
  return kTwoPi / omega_;
}

double PhaseModel::rate_scale() const {
  if (std::isfinite(omega_)) return omega_;
  // max|f| of the theta neuron is attained at 0 or pi.
  return std::max(std::abs(f(0.0)), std::abs(f(std::numbers::pi)));
}

double PhaseModel::prc_amplitude() const {
  switch (kind_) {
    case ModelKind::Sinusoidal: return std::abs(z_d_);
    case ModelKind::Sniper: return 2.0 * std::abs(z_d_);
    case ModelKind::Theta: return 2.0;
    case ModelKind::Tabulated: {
      double m = 0.0;
      for (double v : table_->z) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

std::string PhaseModel::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  switch (kind_) {
    case ModelKind::Sinusoidal:
    case ModelKind::Sniper: os << "(omega=" << omega_ << ", z_d=" << z_d_ << ")"; break;
    case ModelKind::Theta: os << "(I_b=" << baseline_ << ")"; break;
    case ModelKind::Tabulated: os << "(omega=" << omega_ << ", samples=" << table_->z.size() << ")"; break;
  }
  return os.str();
}

PhaseModel make_sinusoidal(double omega, double z_d) {
  if (!(omega > 0.0) || z_d == 0.0 || !std::isfinite(z_d))
    throw Error(ErrorCode::BadParameter, "sinusoidal model needs omega > 0 and z_d != 0");
  PhaseModel m;
  m.kind_ = ModelKind::Sinusoidal;
  m.omega_ = omega;
  m.z_d_ = z_d;
  return m;
}

PhaseModel make_sniper(double omega, double z_d) {
  if (!(omega > 0.0) || z_d == 0.0 || !std::isfinite(z_d))
    throw Error(ErrorCode::BadParameter, "SNIPER model needs omega > 0 and z_d != 0");
  PhaseModel m;
  m.kind_ = ModelKind::Sniper;
  m.omega_ = omega;
  m.z_d_ = z_d;
  return m;
}

PhaseModel make_theta(double baseline_current) {
  if (!std::isfinite(baseline_current)) throw Error(ErrorCode::BadParameter, "I_b must be finite");
  PhaseModel m;
  m.kind_ = ModelKind::Theta;
  m.baseline_ = baseline_current;
  m.z_d_ = 1.0;
  m.autonomous_ = baseline_current > 0.0;
  // T0 = pi / sqrt(I_b)  <=>  omega = 2 sqrt(I_b).
  m.omega_ = m.autonomous_ ? 2.0 * std::sqrt(baseline_current) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

PhaseModel make_tabulated(const PrcTable& table) {
  table.validate();
  PhaseModel m;
  m.kind_ = ModelKind::Tabulated;
  m.omega_ = table.omega;
  m.z_d_ = 1.0;
  m.table_ = std::make_shared<const PrcTable>(table);
  m.spline_ = std::make_shared<const PeriodicCubic>(table.z);
  return m;
}

void write_prc_csv(std::ostream& os, const PrcTable& table) {
  os << "# omega=" << format_number(table.omega) << '\n';
  os << "theta,Z\n";
  for (std::size_t i = 0; i < table.z.size(); ++i)
    os << format_number(table.theta[i]) << ',' << format_number(table.z[i]) << '\n';
}

PrcTable read_prc_csv(std::istream& is) {
  PrcTable t;
  bool have_omega = false, have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pos = line.find("omega=");
      if (pos != std::string::npos) {
        try {
          t.omega = std::stod(line.substr(pos + 6));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidInput, "unreadable omega on line " + std::to_string(line_no));
        }
        have_omega = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != "theta,Z") throw Error(ErrorCode::InvalidInput, "expected header 'theta,Z'");
      have_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidInput, "malformed row " + std::to_string(line_no));
    try {
      t.theta.push_back(std::stod(line.substr(0, comma)));
      t.z.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, "malformed number on line " + std::to_string(line_no));
    }
  }
  if (!have_omega) throw Error(ErrorCode::InvalidInput, "missing '# omega=' metadata line");
  if (!have_header) throw Error(ErrorCode::InvalidInput, "missing 'theta,Z' header");
  t.validate();
  return t;
}

PrcTable read_prc_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open PRC file " + path);
  return read_prc_csv(in);
}

}  // namespace spikeopt
