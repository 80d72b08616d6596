#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace spikeopt {

/// 12 significant digits, `.` separator; infinities print as "inf"/"-inf".
std::string format_number(double value);

/// Value rounded to 12 significant digits (what format_number prints), so
/// JSON output is stable across runs.
double round_sig12(double value);

/// Writes via a sibling temporary file and rename. Throws Error(InvalidInput)
/// on I/O failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace spikeopt
