#pragma once

#include <span>
#include <vector>

#include "pose_forge/geometry.h"
#include "pose_forge/object_model.h"

namespace pose_forge {

using PointCloud = std::vector<Vec3>;

struct IcpConfig {
  int max_iterations = 50;
  double convergence_tol = 1e-6;   // relative change of the gated RMSE
  double max_corr_dist_mm = 50.0;  // correspondence gate

  void validate() const;
};

struct IcpResult {
  Pose pose;
  double final_rmse_mm = 0.0;
  // Gated RMSE of the initial pose followed by one entry per accepted
  // iteration; non-increasing.
  std::vector<double> rmse_trace;
  int iterations = 0;
};

// Least-squares rigid transform mapping src[i] onto dst[i] (Kabsch/Umeyama
// without scale). Requires >= 3 pairs and non-collinear src.
Pose kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst);

// Point-to-point ICP of the model cloud against an observed cloud, starting
// from `init` (model -> camera). Every model point pays min(d^2, gate^2)
// where d is the distance to its nearest observed point; the RMSE of that
// truncated cost cannot increase from one iteration to the next, and an
// iteration that would increase it (round-off) ends the loop with the
// previous pose.
IcpResult icp_refine(const ObjectModel& model, std::span<const Vec3> observed,
                     const Pose& init, const IcpConfig& cfg = {});

}  // namespace pose_forge
