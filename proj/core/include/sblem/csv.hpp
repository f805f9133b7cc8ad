#pragma once

#include <filesystem>
#include <string>

#include "sblem/model.hpp"

namespace sblem {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Headerless numeric CSV, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& M);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Single line of comma-separated 0/1 entries.
void write_indicator_csv(const std::filesystem::path& path, const Indicator& z);
Indicator read_indicator_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sblem
