#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pose_forge/geometry.h"

namespace pose_forge {

struct Correspondence {
  Vec3 model_point;  // mm, object frame
  Vec2 image_point;  // px
};

struct RansacConfig {
  double inlier_threshold_px = 2.0;
  int max_iterations = 1000;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PnpResult {
  Pose pose;
  std::vector<bool> inlier_mask;
  double mean_reproj_err_px = 0.0;  // over inliers only
  int iterations = 0;               // hypotheses drawn
};

struct RefineStats {
  double initial_cost = 0.0;  // sum of squared reprojection residuals, px^2
  double final_cost = 0.0;
  int iterations = 0;
};

inline constexpr std::size_t kPnpMinimalSample = 6;

// Reprojection error in pixels; +inf when the point is not in front of the
// camera.
double reprojection_error(const CameraIntrinsics& k, const Pose& pose,
                          const Correspondence& c);

// Linear pose from >= 6 non-coplanar correspondences. The 3x4 projection in
// normalized camera coordinates is solved as the null vector of the DLT
// system (with similarity normalization of the 3D points), then projected
// onto SE(3).
Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics& k);

// Gauss-Newton on the sum of squared reprojection residuals. The update is
// a left-multiplied rotation vector plus a translation increment. Steps that
// do not lower the cost are rejected, so the returned cost never exceeds the
// initial one.
Pose pnp_refine(const Pose& init, std::span<const Correspondence> corrs,
                const CameraIntrinsics& k, int max_iters = 50, double tol = 1e-12,
                RefineStats* stats = nullptr);

// Six-point RANSAC around pnp_dlt followed by pnp_refine on the consensus
// set. Hypothesis i draws from RngStream(cfg.seed, "pnp-ransac", i), so the
// winner does not depend on evaluation order.
PnpResult pnp_ransac(std::span<const Correspondence> corrs,
                     const CameraIntrinsics& k, const RansacConfig& cfg);

}  // namespace pose_forge
