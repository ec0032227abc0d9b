#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gzsl::detail {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Parses a headerless numeric CSV file into rows. Throws DataError with file,
// row and column on malformed fields. Blank lines are skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace gzsl::detail
