#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hestonsi/types.hpp"

namespace hestonsi {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

double parse_double(std::string_view text);

std::vector<std::string> split(std::string_view line, char delimiter);

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

/// Headerless CSV of a dense matrix, one line per row.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);

}  // namespace hestonsi
