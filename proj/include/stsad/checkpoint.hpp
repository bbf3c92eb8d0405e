#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stsad {

/// Little-endian model container:
///
///     magic[8] | u32 version | u32 n_texts | n_texts x (u32 len, utf8 bytes)
///     | u32 n_blocks | n_blocks x (u32 name_len, name, u32 ndim,
///     ndim x u64 dim, prod(dims) x f32)
///
/// Two-dimensional blocks hold column-major data.
struct TensorBlock {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

struct Container {
  std::array<char, 8> magic{};
  std::uint32_t version = 0;
  std::vector<std::string> texts;
  std::vector<TensorBlock> blocks;

  const TensorBlock& block(const std::string& name) const;
};

inline constexpr std::array<char, 8> kVaeMagic{'S', 'T', 'S', 'A', 'D', 'V', 'A', 'E'};
inline constexpr std::array<char, 8> kPcaMagic{'S', 'T', 'S', 'A', 'D', 'P', 'C', 'A'};

void write_container(std::ostream& out, const Container& container);
Container read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const Container& container);
Container load_container(const std::filesystem::path& path);

/// Reads only the magic bytes; throws CheckpointError if unreadable.
std::array<char, 8> peek_magic(const std::filesystem::path& path);

}  // namespace stsad
