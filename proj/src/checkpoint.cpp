#include "arsq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace arsq {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'S', 'Q', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error("checkpoint " + path.string() + ": truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const ad::Parameter* const> params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.size());
  for (const ad::Parameter* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name().size()));
    out.write(p->name().data(), static_cast<std::streamsize>(p->name().size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value().rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value().cols()));
    out.write(reinterpret_cast<const char*>(p->value().data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value().size())));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint " + path.string() + ": bad magic");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, path);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get<std::uint32_t>(in, path);
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw std::runtime_error("checkpoint " + path.string() + ": truncated name");
    const auto rank = get<std::uint32_t>(in, path);
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get<std::uint64_t>(in, path));
      n *= t.shape.back();
    }
    t.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("checkpoint " + path.string() + ": truncated data for " + t.name);
    out.push_back(std::move(t));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, std::span<ad::Parameter* const> params) {
  std::map<std::string, NamedTensor> by_name;
  for (auto& t : read_checkpoint(path)) by_name.emplace(t.name, std::move(t));
  for (ad::Parameter* p : params) {
    auto it = by_name.find(p->name());
    if (it == by_name.end()) throw std::runtime_error("checkpoint lacks parameter '" + p->name() + "'");
    const NamedTensor& t = it->second;
    const bool shape_ok = t.shape.size() == 2 && t.shape[0] == static_cast<std::uint64_t>(p->value().rows()) &&
                          t.shape[1] == static_cast<std::uint64_t>(p->value().cols());
    if (!shape_ok) throw std::runtime_error("checkpoint shape mismatch for parameter '" + p->name() + "'");
    std::memcpy(p->value().data(), t.data.data(), t.data.size() * sizeof(double));
  }
}

}  // namespace arsq
