#include "stsad/checkpoint.hpp"

#include "stsad/error.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace stsad {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void put(std::ostream& out, T value) {
  const auto le = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw CheckpointError("truncated checkpoint");
  return byteswap_if_big(value);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  if (len > (1u << 30)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

const TensorBlock& Container::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw CheckpointError("checkpoint has no parameter block '" + name + "'");
}

void write_container(std::ostream& out, const Container& container) {
  out.write(container.magic.data(), container.magic.size());
  put<std::uint32_t>(out, container.version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(container.texts.size()));
  for (const auto& t : container.texts) put_string(out, t);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(container.blocks.size()));
  for (const auto& b : container.blocks) {
    put_string(out, b.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) put<std::uint64_t>(out, d);
    for (float v : b.data) put<float>(out, v);
  }
}

Container read_container(std::istream& in) {
  Container c;
  in.read(c.magic.data(), c.magic.size());
  if (!in) throw CheckpointError("not a checkpoint file (too short)");
  if (c.magic != kVaeMagic && c.magic != kPcaMagic) throw CheckpointError("not a checkpoint file (bad magic)");
  c.version = get<std::uint32_t>(in);
  const auto n_texts = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_texts; ++i) c.texts.push_back(get_string(in));
  const auto n_blocks = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    TensorBlock b;
    b.name = get_string(in);
    const auto ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw CheckpointError("implausible tensor rank in block " + b.name);
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      b.shape.push_back(get<std::uint64_t>(in));
      count *= b.shape.back();
    }
    if (count > (1ull << 32)) throw CheckpointError("implausible tensor size in block " + b.name);
    b.data.resize(count);
    for (auto& v : b.data) v = get<float>(in);
    c.blocks.push_back(std::move(b));
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& container) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write_container(out, container);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_container(in);
}

std::array<char, 8> peek_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  return magic;
}

}  // namespace stsad
