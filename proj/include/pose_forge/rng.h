#pragma once

#include <cstdint>
#include <string_view>

namespace pose_forge {

// Counter-based random stream. Output i of a stream is
//   splitmix64_finalize(key + (i + 1) * 0x9E3779B97F4A7C15)
// where key = finalize(finalize(seed ^ fnv1a64(purpose)) + index * golden).
// Streams with different (seed, purpose, index) are independent and the
// sequence does not depend on the standard library implementation.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose,
            std::uint64_t index = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). Unbiased (rejection on the low product word).
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double gaussian();

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_finalize(std::uint64_t z);
std::uint64_t fnv1a64(std::string_view text);

// Derives a child seed, e.g. the seed of scene `index` in a batch.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index);

}  // namespace pose_forge
