#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowam::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

void append_le_doubles(std::string& out, std::span<const double> values);
std::vector<double> parse_le_doubles(std::string_view bytes, std::size_t count);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace flowam::io
