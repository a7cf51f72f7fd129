#include "hyperemo/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "hyperemo/errors.hpp"

namespace hyperemo::checkpoint {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw LoadError(std::string("truncated checkpoint: ") + what);
  return v;
}

}  // namespace

void write(std::ostream& out, std::span<const ad::Parameter* const> params) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kVersion));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    if (p->name.empty() || p->name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidInput("checkpoint tensor name length out of range");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint write failed");
}

void save(const std::filesystem::path& path, std::span<const ad::Parameter* const> params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open checkpoint for writing", 0, path.string());
  write(out, params);
}

std::vector<NamedTensor> read(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint8_t>(in, "version");
  if (version != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw LoadError("truncated checkpoint: tensor name");
    const auto rows = get<std::uint32_t>(in, "rows");
    const auto cols = get<std::uint32_t>(in, "cols");
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw LoadError("truncated checkpoint: tensor data", 0, name);
    }
    out.push_back(NamedTensor{std::move(name), std::move(m)});
  }
  return out;
}

void load_into(std::istream& in, std::span<ad::Parameter* const> params) {
  auto tensors = read(in);
  std::unordered_map<std::string, ad::Parameter*> by_name;
  for (auto* p : params) by_name.emplace(p->name, p);
  if (tensors.size() != params.size()) {
    throw LoadError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  }
  for (auto& t : tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw LoadError("unknown tensor in checkpoint", 0, t.name);
    if (!it->second->value.same_shape(t.value)) {
      throw LoadError("shape " + std::to_string(t.value.rows()) + "x" + std::to_string(t.value.cols()) +
                          " does not match the model's " + std::to_string(it->second->value.rows()) + "x" +
                          std::to_string(it->second->value.cols()),
                      0, t.name);
    }
  }
  for (auto& t : tensors) by_name[t.name]->value = std::move(t.value);
}

void load_into(const std::filesystem::path& path, std::span<ad::Parameter* const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint", 0, path.string());
  load_into(in, params);
}

}  // namespace hyperemo::checkpoint
