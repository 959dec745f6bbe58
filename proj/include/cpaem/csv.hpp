#pragma once

#include "cpaem/linalg.hpp"

#include <string>
#include <vector>

namespace cpaem {

/// Comma-separated rows of numbers, locale independent. Every row must have
/// the same number of columns.
std::vector<Vec> read_csv(const std::string& path, bool header = false);
void write_csv(const std::string& path, const std::vector<Vec>& rows, const std::vector<std::string>& header = {});

/// Shortest-exact "%.17g" rendering.
std::string format_double(double v);
/// "0.1,0.2" -> vector.
Vec parse_vector(const std::string& text);

}  // namespace cpaem
