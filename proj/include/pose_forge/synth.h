#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pose_forge/feature_match.h"
#include "pose_forge/geometry.h"
#include "pose_forge/icp.h"
#include "pose_forge/object_model.h"
#include "pose_forge/pnp.h"
#include "pose_forge/regressor.h"
#include "pose_forge/rng.h"

namespace pose_forge {

// 640x480, f = 500 px, principal point at the image center.
CameraIntrinsics default_camera();

// Procedural cordless-drill stand-in: body, pistol grip, battery foot and
// chuck, ~`n_points` surface samples, centered on its centroid. Asymmetric.
ObjectModel make_driller_model(std::size_t n_points = 1000);

// Rotation: normalized 4-Gaussian quaternion (uniform on SO(3)).
// Translation: the model centroid lands at depth uniform in
// [depth_min, depth_max] and projects to a uniform pixel in the central 80%
// of the image.
Pose sample_pose(RngStream& rng, const CameraIntrinsics& camera, double depth_min_mm,
                 double depth_max_mm, const Vec3& model_centroid = Vec3::Zero());

// Rotates by exactly `rot_deg` about a random axis through the model
// centroid in the camera frame and shifts by exactly `trans_mm` in a random
// direction.
Pose perturb_pose(const Pose& pose, double rot_deg, double trans_mm, RngStream& rng,
                  const Vec3& model_centroid = Vec3::Zero());

struct SceneConfig {
  std::uint64_t seed = 0;
  CameraIntrinsics camera = default_camera();
  std::size_t n_keypoints = 8;
  double pixel_noise_sigma = 0.0;  // px
  double outlier_rate = 0.0;       // fraction of visible keypoints, [0, 1)
  double occlusion_rate = 0.0;     // fraction of keypoints dropped, [0, 1)
  double depth_min_mm = 800.0;
  double depth_max_mm = 1200.0;
  double cloud_noise_sigma = 0.0;  // mm

  // Dense feature map: one patch per stride x stride pixel block.
  double feature_stride_px = 8.0;
  std::size_t feature_dim = 64;
  double descriptor_noise = 0.05;

  // Global feature pair for the regression branch.
  std::size_t clip_feature_dim = 32;
  double clip_feature_noise = 0.01;
  std::uint64_t embedding_seed = 0;

  // kInvalidArgument on out-of-range fields; kConfigRejected when fewer than
  // 6 keypoints would remain visible.
  void validate() const;
  std::size_t visible_keypoints() const;
};

struct Scene {
  CameraIntrinsics camera;
  Pose gt_pose;
  KeypointSet keypoints;
  // One entry per visible keypoint, in keypoint order.
  std::vector<std::size_t> keypoint_ids;
  std::vector<Correspondence> correspondences;
  std::vector<bool> outlier_mask;
  // Noise-free projections of the visible keypoints under gt_pose.
  std::vector<Vec2> clean_projections;
  PointCloud observed_cloud;
  DenseFeatureMap feature_map;
  std::vector<KeypointTemplate> templates;  // one per keypoint
  FeatureVector visual;
  FeatureVector semantic;
};

// Pure function of (model, cfg). Order of operations: keypoints, pose,
// occlusion (floor(occlusion_rate * n) keypoints dropped), pixel noise, then
// floor(outlier_rate * visible) correspondences replaced by uniform in-image
// pixels. Each visible keypoint's template is planted at the patch holding
// its observed image point; colliding keypoints share the normalized sum.
Scene generate_scene(const ObjectModel& model, const SceneConfig& cfg);

// Fixed linear map from (q, t / 1000) to D features.
class RegressionEmbedding {
 public:
  RegressionEmbedding(std::uint64_t seed, std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  // Noise-free features of a pose (canonical quaternion).
  Eigen::VectorXd encode(const Pose& pose) const;
  // First ceil(D/2) entries are the visual half, the rest semantic.
  std::pair<FeatureVector, FeatureVector> split(const Eigen::VectorXd& features) const;

 private:
  Eigen::MatrixXd matrix_;
};

// n samples: poses from sample_pose with the default camera, features from
// RegressionEmbedding(seed, dim) plus Gaussian noise.
std::vector<RegressionSample> generate_regression_dataset(std::uint64_t seed, std::size_t n,
                                                          std::size_t dim,
                                                          double noise_sigma = 0.01);

// Scene directory layout:
//   correspondences.csv  kp_index,X,Y,Z,u,v,is_outlier
//   cloud.xyz            observed points, one per line
//   features.vfmt        dense feature map (+ features.meta.json)
//   templates.vfmt       n x dim descriptors (+ templates.meta.json with the
//                        keypoint model indices and positions)
//   visual.vfmt          global feature halves, rank 1
//   semantic.vfmt
//   camera.json          {"fx", "fy", "cx", "cy", "width", "height"}
//   gt_pose.json         {"R": [[...]], "t": [...]}
// Returns the file names written, in that order.
std::vector<std::string> write_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_scene(const std::filesystem::path& dir);

void write_pose_json(const std::filesystem::path& path, const Pose& pose);
Pose read_pose_json(const std::filesystem::path& path);

}  // namespace pose_forge
