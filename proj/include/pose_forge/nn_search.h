#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pose_forge/geometry.h"

namespace pose_forge {

// Exact nearest-neighbor queries over a fixed 3D point set. Small sets are
// scanned linearly; sets above `grid_threshold` points go through a uniform
// grid searched in growing Chebyshev shells. Both paths return the same
// answer: the minimum squared distance, ties resolved to the lowest index.
class NearestNeighborIndex {
 public:
  static constexpr std::size_t kDefaultGridThreshold = 5000;

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  explicit NearestNeighborIndex(std::span<const Vec3> points,
                                std::size_t grid_threshold = kDefaultGridThreshold);

  // Precondition: the indexed set is non-empty.
  Hit nearest(const Vec3& query) const;

  bool uses_grid() const { return grid_; }
  std::size_t size() const { return points_.size(); }

 private:
  Hit brute_force(const Vec3& query) const;
  Hit grid_search(const Vec3& query) const;
  std::size_t cell_index(long i, long j, long k) const;

  std::vector<Vec3> points_;
  Vec3 origin_ = Vec3::Zero();
  double cell_size_ = 1.0;
  long dims_[3] = {1, 1, 1};
  // CSR layout: point indices of cell c are sorted_[offsets_[c] .. offsets_[c+1]).
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> sorted_;
  bool grid_ = false;
};

}  // namespace pose_forge
