#include "pose_forge/nn_search.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pose_forge {
namespace {

constexpr long kMaxCellsPerAxis = 128;

bool better(double d, std::size_t i, const NearestNeighborIndex::Hit& best) {
  return d < best.squared_distance ||
         (d == best.squared_distance && i < best.index);
}

}  // namespace

NearestNeighborIndex::NearestNeighborIndex(std::span<const Vec3> points,
                                           std::size_t grid_threshold)
    : points_(points.begin(), points.end()) {
  if (points_.size() <= grid_threshold || points_.empty()) return;

  Vec3 lo = points_.front();
  Vec3 hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  const double largest = std::max(extent.maxCoeff(), 1e-9);
  const Vec3 padded = extent.cwiseMax(Vec3::Constant(largest * 1e-3));
  // About two points per occupied cell for a volume-filling set.
  const double volume = padded.prod();
  cell_size_ = std::cbrt(2.0 * volume / static_cast<double>(points_.size()));
  cell_size_ = std::max(cell_size_, largest / kMaxCellsPerAxis);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::clamp<long>(
        static_cast<long>(std::floor(extent[a] / cell_size_)) + 1, 1,
        kMaxCellsPerAxis + 1);
  }

  const std::size_t n_cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  std::vector<std::size_t> cell_of(points_.size());
  offsets_.assign(n_cells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    long c[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp<long>(
          static_cast<long>(std::floor((points_[i][a] - origin_[a]) / cell_size_)),
          0, dims_[a] - 1);
    }
    cell_of[i] = cell_index(c[0], c[1], c[2]);
    ++offsets_[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) offsets_[c + 1] += offsets_[c];
  sorted_.resize(points_.size());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    sorted_[fill[cell_of[i]]++] = i;
  }
  grid_ = true;
}

std::size_t NearestNeighborIndex::cell_index(long i, long j, long k) const {
  return static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k);
}

NearestNeighborIndex::Hit NearestNeighborIndex::nearest(const Vec3& query) const {
  return uses_grid() ? grid_search(query) : brute_force(query);
}

NearestNeighborIndex::Hit NearestNeighborIndex::brute_force(const Vec3& query) const {
  Hit best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = (points_[i] - query).squaredNorm();
    if (better(d, i, best)) best = {i, d};
  }
  return best;
}

NearestNeighborIndex::Hit NearestNeighborIndex::grid_search(const Vec3& query) const {
  long q[3];
  long max_radius = 0;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((query[a] - origin_[a]) / cell_size_);
    q[a] = static_cast<long>(std::clamp(f, -1e9, 1e9));
    max_radius = std::max({max_radius, std::abs(q[a]), std::abs(dims_[a] - 1 - q[a])});
  }

  long first_radius = 0;
  for (int a = 0; a < 3; ++a) {
    first_radius = std::max({first_radius, -q[a], q[a] - (dims_[a] - 1)});
  }

  Hit best{0, std::numeric_limits<double>::infinity()};
  for (long r = first_radius; r <= max_radius; ++r) {
    const long i0 = std::max(q[0] - r, 0L), i1 = std::min(q[0] + r, dims_[0] - 1);
    const long j0 = std::max(q[1] - r, 0L), j1 = std::min(q[1] + r, dims_[1] - 1);
    const long k0 = std::max(q[2] - r, 0L), k1 = std::min(q[2] + r, dims_[2] - 1);
    for (long i = i0; i <= i1; ++i) {
      const bool i_edge = std::abs(i - q[0]) == r;
      for (long j = j0; j <= j1; ++j) {
        const bool ij_edge = i_edge || std::abs(j - q[1]) == r;
        for (long k = k0; k <= k1; ++k) {
          // Only the shell at Chebyshev distance r is new this round.
          if (!ij_edge && std::abs(k - q[2]) != r) {
            k = std::max(k, q[2] + r - 1);
            continue;
          }
          const std::size_t c = cell_index(i, j, k);
          for (std::size_t s = offsets_[c]; s < offsets_[c + 1]; ++s) {
            const std::size_t idx = sorted_[s];
            const double d = (points_[idx] - query).squaredNorm();
            if (better(d, idx, best)) best = {idx, d};
          }
        }
      }
    }
    // Unvisited cells are at least r cell widths away along some axis.
    // Strict comparison: a point exactly on the bound may have a lower index.
    const double bound = static_cast<double>(r) * cell_size_;
    if (best.squared_distance < bound * bound) break;
  }
  return best;
}

}  // namespace pose_forge
