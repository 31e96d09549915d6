#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace pose_forge {

// VFMT tensor record, little-endian:
//   "VFMT" | u32 version = 1 | u32 dtype = 1 (f32) | u32 rank |
//   rank x u64 dims | row-major f32 payload
struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::uint64_t element_count() const;
};

inline constexpr std::uint32_t kVfmtVersion = 1;
inline constexpr std::uint32_t kVfmtDtypeF32 = 1;

void write_tensor(std::ostream& out, const Tensor& tensor);
// Reads exactly one record. Errors: kBadMagic, kUnsupportedFormat,
// kLengthMismatch (truncated header or payload), kNonFinite.
Tensor read_tensor(std::istream& in);

// Whole-file helpers. A file read this way must hold exactly one record;
// trailing bytes are a kLengthMismatch.
void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor_file(const std::filesystem::path& path);

// Reads back-to-back records until end of file.
std::vector<Tensor> read_tensor_records(const std::filesystem::path& path);
void write_tensor_records(const std::filesystem::path& path,
                          const std::vector<Tensor>& tensors);

// "<dir>/<stem>.meta.json" for "<dir>/<stem>.<ext>".
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

}  // namespace pose_forge
