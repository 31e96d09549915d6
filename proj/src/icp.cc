#include "pose_forge/icp.h"

#include <Eigen/SVD>
#include <cmath>

#include <fmt/format.h>

#include "pose_forge/error.h"
#include "pose_forge/nn_search.h"

namespace pose_forge {
namespace {

constexpr double kCollinearRelativeSv = 1e-9;

struct Matching {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  double rmse = 0.0;  // truncated, over all model points
};

Matching match(const std::vector<Vec3>& model_points, const Pose& pose,
               const NearestNeighborIndex& index, std::span<const Vec3> observed,
               double gate) {
  Matching m;
  const double gate2 = gate * gate;
  double cost = 0.0;
  for (const auto& x : model_points) {
    const auto hit = index.nearest(pose.apply(x));
    if (hit.squared_distance <= gate2) {
      m.src.push_back(x);
      m.dst.push_back(observed[hit.index]);
      cost += hit.squared_distance;
    } else {
      cost += gate2;
    }
  }
  m.rmse = std::sqrt(cost / static_cast<double>(model_points.size()));
  return m;
}

}  // namespace

void IcpConfig::validate() const {
  if (max_iterations < 1 || !(convergence_tol > 0.0) || !(max_corr_dist_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ICP parameters must be positive");
  }
}

Pose kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kSizeMismatch,
                fmt::format("paired sets differ in size ({} vs {})", src.size(), dst.size()));
  }
  if (src.size() < 3) {
    throw Error(ErrorCode::kTooFewPoints,
                fmt::format("alignment needs >= 3 pairs, got {}", src.size()));
  }
  const auto n = static_cast<double>(src.size());
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= n;
  cd /= n;

  Mat3 spread = Mat3::Zero();
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - cs;
    spread.noalias() += a * a.transpose();
    cov.noalias() += (dst[i] - cd) * a.transpose();
  }
  const Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const Vec3 sv = spread_svd.singularValues();
  // sv are squared extents; the second one vanishes for collinear sets.
  if (!(sv[1] > kCollinearRelativeSv * kCollinearRelativeSv * sv[0])) {
    throw Error(ErrorCode::kCollinearDegenerate, "source points are collinear");
  }

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  Pose pose;
  pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  pose.translation = cd - pose.rotation * cs;
  return pose;
}

IcpResult icp_refine(const ObjectModel& model, std::span<const Vec3> observed,
                     const Pose& init, const IcpConfig& cfg) {
  cfg.validate();
  if (observed.empty()) {
    throw Error(ErrorCode::kEmptyInput, "observed cloud is empty");
  }
  const NearestNeighborIndex index(observed);

  IcpResult result;
  result.pose = init;
  Matching current = match(model.points, init, index, observed, cfg.max_corr_dist_mm);
  result.rmse_trace.push_back(current.rmse);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (current.src.empty()) {
      throw Error(ErrorCode::kGatingFailure,
                  fmt::format("no correspondences within {} mm at iteration {}",
                              cfg.max_corr_dist_mm, iter));
    }
    if (current.src.size() < 3) break;
    Pose next;
    try {
      next = kabsch_align(current.src, current.dst);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCollinearDegenerate) break;
      throw;
    }
    Matching rematched = match(model.points, next, index, observed, cfg.max_corr_dist_mm);
    if (rematched.rmse > current.rmse) break;

    const double change = current.rmse - rematched.rmse;
    const double previous = current.rmse;
    result.pose = next;
    current = std::move(rematched);
    result.rmse_trace.push_back(current.rmse);
    result.iterations = iter + 1;
    if (current.rmse == 0.0 || change <= cfg.convergence_tol * previous) break;
  }
  result.final_rmse_mm = current.rmse;
  return result;
}

}  // namespace pose_forge
