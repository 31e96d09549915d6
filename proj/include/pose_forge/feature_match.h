#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pose_forge/geometry.h"
#include "pose_forge/object_model.h"
#include "pose_forge/pnp.h"

namespace pose_forge {

// grid_h x grid_w grid of dim-dimensional patch descriptors, row-major
// ((row * grid_w + col) * dim + d). Patch (row, col) is centered on pixel
// origin_px + stride_px * (col, row).
struct DenseFeatureMap {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t dim = 0;
  double stride_px = 1.0;
  Vec2 origin_px = Vec2::Zero();
  int image_width = 0;
  int image_height = 0;
  std::string model;  // backbone tag, e.g. "dinov2-vit-b14"
  std::vector<float> data;

  std::span<const float> descriptor(std::size_t row, std::size_t col) const {
    return {data.data() + (row * grid_w + col) * dim, dim};
  }
  std::span<float> descriptor(std::size_t row, std::size_t col) {
    return {data.data() + (row * grid_w + col) * dim, dim};
  }
  Vec2 patch_center(std::size_t row, std::size_t col) const {
    return origin_px + stride_px * Vec2(static_cast<double>(col), static_cast<double>(row));
  }

  // Throws kLengthMismatch / kNonFinite / kInvalidArgument.
  void validate() const;
};

DenseFeatureMap make_feature_map(std::size_t grid_h, std::size_t grid_w,
                                 std::size_t dim, double stride_px, Vec2 origin_px,
                                 int image_width, int image_height, std::string model);

// Tensor at `path` (rank 3: grid_h, grid_w, dim) plus the JSON sidecar
// `<stem>.meta.json` with stride_px, origin_px [u, v], image_size [w, h] and
// model.
DenseFeatureMap load_feature_map(const std::filesystem::path& path);
void write_feature_map(const std::filesystem::path& path, const DenseFeatureMap& map);

struct KeypointTemplate {
  std::size_t model_index = 0;
  Vec3 position = Vec3::Zero();
  Eigen::VectorXd descriptor;  // unit L2 norm
};

// Normalizes the descriptor; throws kDegenerateInput on a zero vector.
KeypointTemplate make_template(std::size_t model_index, const Vec3& position,
                               Eigen::VectorXd descriptor);

struct Detection {
  Vec2 image_point = Vec2::Zero();
  double score = 0.0;  // cosine similarity
  std::size_t row = 0;
  std::size_t col = 0;
};

// For every template, the patch with the highest cosine similarity (ties to
// the lowest row-major index). Patches with a zero descriptor score 0. A
// template whose best score is below `min_score` yields nullopt.
std::vector<std::optional<Detection>> match_keypoints(
    const DenseFeatureMap& map, std::span<const KeypointTemplate> templates,
    double min_score = 0.3);

// Pairs present detections with their keypoint positions in template order.
// Throws kInsufficientCorrespondences below the PnP minimum of 6.
std::vector<Correspondence> build_correspondences(
    std::span<const std::optional<Detection>> detections, const KeypointSet& keypoints);

}  // namespace pose_forge
