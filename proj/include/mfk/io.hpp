#pragma once

#include "mfk/field.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mfk {

/// 17 significant digits, so doubles round-trip exactly.
std::string format_number(double value);

/// Header t,x1..xd,value; one row per (level, node).
void write_field_csv(const std::filesystem::path& path, const Field& field);

/// Header row plus rows of numbers.
void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mfk
