#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"

namespace hyperemo::checkpoint {

// Layout, little-endian throughout:
//   magic "HECKPT\0\1"  u8 version  u32 tensor count
//   per tensor: u16 name length, name bytes, u32 rows, u32 cols, rows*cols f64
inline constexpr char kMagic[8] = {'H', 'E', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr unsigned kVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

void write(std::ostream& out, std::span<const ad::Parameter* const> params);
void save(const std::filesystem::path& path, std::span<const ad::Parameter* const> params);

std::vector<NamedTensor> read(std::istream& in);

// Copies every stored tensor into the parameter of the same name. Missing,
// extra or reshaped tensors are a LoadError.
void load_into(std::istream& in, std::span<ad::Parameter* const> params);
void load_into(const std::filesystem::path& path, std::span<ad::Parameter* const> params);

}  // namespace hyperemo::checkpoint
