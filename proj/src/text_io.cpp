#include "hyperemo/text_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "hyperemo/errors.hpp"

namespace hyperemo::text {

bool is_skippable(std::string_view line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

bool is_ascii(std::string_view line) {
  for (unsigned char c : line) {
    if (c > 0x7f) return false;
  }
  return true;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  return split_tabs(line, static_cast<std::size_t>(-1));
}

std::vector<std::string_view> split_tabs(std::string_view line, std::size_t max_fields) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_fields) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) break;
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

std::vector<double> parse_reals(std::string_view field, std::size_t line, std::string_view what) {
  std::vector<double> out;
  if (field.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = field.find(',', start);
    auto tok = field.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      throw LoadError("malformed real '" + std::string(tok) + "' in " + std::string(what), line);
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_reals(const double* v, std::size_t n, char sep) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out.push_back(sep);
    out += format_real(v[i]);
  }
  return out;
}

std::uint64_t checksum(const double* v, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v[i], sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace hyperemo::text
