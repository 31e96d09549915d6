#include "pose_forge/vfmt.h"

#include <array>
#include <cstdint>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "pose_forge/error.h"

namespace pose_forge {
namespace {

constexpr std::array<char, 4> kMagic = {'V', 'F', 'M', 'T'};
// Refuse absurd headers before allocating.
constexpr std::uint32_t kMaxRank = 16;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorCode::kLengthMismatch, fmt::format("truncated VFMT header ({})", what));
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (const auto d : shape) {
    if (d != 0 && n > UINT64_MAX / d) return UINT64_MAX;  // saturate on overflow
    n *= d;
  }
  return n;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.element_count() != tensor.data.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("tensor shape holds {} elements but data has {}",
                            tensor.element_count(), tensor.data.size()));
  }
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVfmtVersion);
  put_le<std::uint32_t>(out, kVfmtDtypeF32);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape.size()));
  for (const auto d : tensor.shape) put_le<std::uint64_t>(out, d);
  for (const float f : tensor.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw Error(ErrorCode::kIo, "failed writing VFMT tensor");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) {
    throw Error(ErrorCode::kBadMagic, "not a VFMT tensor (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kVfmtVersion) {
    throw Error(ErrorCode::kUnsupportedFormat, fmt::format("unsupported VFMT version {}", version));
  }
  const auto dtype = get_le<std::uint32_t>(in, "dtype");
  if (dtype != kVfmtDtypeF32) {
    throw Error(ErrorCode::kUnsupportedFormat, fmt::format("unsupported VFMT dtype {}", dtype));
  }
  const auto rank = get_le<std::uint32_t>(in, "rank");
  if (rank > kMaxRank) {
    throw Error(ErrorCode::kUnsupportedFormat, fmt::format("unsupported VFMT rank {}", rank));
  }
  Tensor t;
  for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(get_le<std::uint64_t>(in, "dims"));

  const std::uint64_t count = t.element_count();
  // Validate the payload length against the stream before allocating.
  const auto here = in.tellg();
  if (here != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(here);
    const auto available = static_cast<std::uint64_t>(end - here);
    if (count > available / 4) {
      throw Error(ErrorCode::kLengthMismatch,
                  fmt::format("VFMT payload needs {} bytes, {} available", count * 4, available));
    }
  }
  t.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::array<unsigned char, 4> b;
    in.read(reinterpret_cast<char*>(b.data()), 4);
    if (in.gcount() != 4) {
      throw Error(ErrorCode::kLengthMismatch,
                  fmt::format("VFMT payload truncated at element {} of {}", i, count));
    }
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::kNonFinite, fmt::format("non-finite VFMT value at element {}", i));
    }
    t.data[i] = f;
  }
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor) {
  write_tensor_records(path, {tensor});
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open '{}'", path.string()));
  Tensor t = read_tensor(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("'{}' has trailing bytes after the tensor payload", path.string()));
  }
  return t;
}

std::vector<Tensor> read_tensor_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open '{}'", path.string()));
  std::vector<Tensor> out;
  while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_tensor(in));
  return out;
}

void write_tensor_records(const std::filesystem::path& path,
                          const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  for (const auto& t : tensors) write_tensor(out, t);
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p.replace_extension(".meta.json");
  return p;
}

}  // namespace pose_forge
