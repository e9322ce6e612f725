#pragma once

#include "dhpd/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dhpd::io {

/// Shortest text that strtod maps back to the exact double.
std::string format_real(double value);
double parse_real(const std::string& text);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Ordered `key = value` metadata file.
using KeyValues = std::map<std::string, std::string>;
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);
KeyValues read_key_values(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

}  // namespace dhpd::io
