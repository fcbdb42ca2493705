#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "storewatch/tensor.hpp"

// NNWA named-tensor archives.
//
// Layout (all integers little-endian):
//   "NNWA" | u32 version (1) | u32 metadata pair count
//   | pairs of (u32 len, UTF-8 bytes) for key then value, keys in byte order
//   | u32 entry count
//   | per entry, names in byte order: u32 name len, name, u8 dtype (0 = f32),
//     u8 rank, u32 dims[rank], f32 payload row-major
namespace storewatch::weights {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kMaxNameBytes = 256;

struct TensorArchive {
  // std::map orders keys by byte value, which is the canonical file order.
  std::map<std::string, Tensor> entries;
  std::map<std::string, std::string> metadata{{"format_version", std::to_string(kFormatVersion)}};

  bool contains(const std::string& name) const { return entries.count(name) != 0; }
  const Tensor& at(const std::string& name) const;

  bool operator==(const TensorArchive&) const = default;
};

TensorArchive read_archive(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_archive(const TensorArchive& archive);

TensorArchive load_archive(const std::filesystem::path& path);
void save_archive(const TensorArchive& archive, const std::filesystem::path& path);

struct ManifestEntry {
  std::string name;
  Shape dims;
};
using Manifest = std::vector<ManifestEntry>;

struct ShapeMismatch {
  std::string name;
  Shape expected;
  Shape actual;
};

struct ValidationReport {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  std::vector<ShapeMismatch> mismatched;

  bool ok() const noexcept { return missing.empty() && extra.empty() && mismatched.empty(); }
  std::string describe() const;
};

ValidationReport validate_manifest(const TensorArchive& archive, const Manifest& manifest);

/// Deterministic pseudo-random weights for every manifest entry. Tensors whose
/// name ends in "variance" are strictly positive; "gamma" is centred on 1.
TensorArchive random_archive(const Manifest& manifest, std::uint64_t seed);

}  // namespace storewatch::weights
