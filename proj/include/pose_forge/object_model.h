#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pose_forge/geometry.h"

namespace pose_forge {

struct ObjectModel {
  std::string name;
  std::vector<Vec3> points;  // mm
  bool symmetric = false;
  double diameter = 0.0;     // max pairwise point distance, mm
};

// Validates the points (non-empty, finite) and computes the diameter.
ObjectModel make_object_model(std::string name, std::vector<Vec3> points,
                              bool symmetric = false);

double compute_diameter(std::span<const Vec3> points);
Vec3 centroid(std::span<const Vec3> points);

// Reads an ASCII PLY (vertex x/y/z float properties; other elements ignored)
// or whitespace-separated XYZ text. The format is chosen by the first line:
// "ply" selects PLY, anything else XYZ. Errors carry the offending line.
ObjectModel load_model(const std::filesystem::path& path, bool symmetric = false);

// Plain XYZ reader shared with point-cloud I/O. '#' starts a comment line.
std::vector<Vec3> read_xyz_points(const std::filesystem::path& path);
void write_xyz_points(const std::filesystem::path& path,
                      std::span<const Vec3> points);
void write_ply(const std::filesystem::path& path, const ObjectModel& model);

struct KeypointSet {
  std::vector<std::size_t> model_indices;
  std::vector<Vec3> positions;

  std::size_t size() const { return model_indices.size(); }
};

// Farthest-point sampling. The first keypoint is the point farthest from the
// centroid; each further keypoint maximizes its distance to the chosen set.
// Exact ties go to the lowest model index, so the result is a pure function
// of (model, n); `seed` is accepted for interface stability only.
KeypointSet sample_keypoints(const ObjectModel& model, std::size_t n,
                             std::uint64_t seed = 0);

KeypointSet keypoints_from_indices(const ObjectModel& model,
                                   std::span<const std::size_t> indices);

}  // namespace pose_forge
