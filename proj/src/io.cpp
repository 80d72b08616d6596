#include "spikeopt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spikeopt/error.hpp"

namespace spikeopt {

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

double round_sig12(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  return std::stod(format_number(value));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::InvalidInput, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::InvalidInput, "cannot rename onto " + path.string() + ": " + ec.message());
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteIntegrand: return "NonFiniteIntegrand";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::InfeasiblePhase: return "InfeasiblePhase";
    case ErrorCode::NearZeroPrc: return "NearZeroPrc";
    case ErrorCode::InfeasibleParams: return "InfeasibleParams";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::BangInfeasible: return "BangInfeasible";
    case ErrorCode::NoSwitching: return "NoSwitching";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NoOscillation: return "NoOscillation";
    case ErrorCode::AdjointNoConvergence: return "AdjointNoConvergence";
    case ErrorCode::GatingOutOfBounds: return "GatingOutOfBounds";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

}  // namespace spikeopt
