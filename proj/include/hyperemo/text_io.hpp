#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Helpers shared by the line-oriented document readers and writers.

namespace hyperemo::text {

// Blank or '#' comment line.
bool is_skippable(std::string_view line);
bool is_ascii(std::string_view line);
std::string_view strip_cr(std::string_view line);
std::vector<std::string_view> split_tabs(std::string_view line);
// At most `max_fields` fields; the last one keeps any remaining tabs.
std::vector<std::string_view> split_tabs(std::string_view line, std::size_t max_fields);

// Comma-separated reals. Throws LoadError(line) on malformed or non-finite values.
std::vector<double> parse_reals(std::string_view field, std::size_t line, std::string_view what);
// Shortest round-trip representation.
std::string format_real(double v);
std::string format_reals(const double* v, std::size_t n, char sep = ',');

// FNV-1a over the raw bytes of a double array; used by debug dumps.
std::uint64_t checksum(const double* v, std::size_t n);

}  // namespace hyperemo::text
