#include "pose_forge/pnp.h"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "pose_forge/error.h"
#include "pose_forge/rng.h"

namespace pose_forge {
namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat34 = Eigen::Matrix<double, 3, 4>;

constexpr double kCoplanarRelativeSv = 1e-6;
constexpr double kRankRelativeSv = 1e-10;
constexpr int kMaxInlierRounds = 5;
constexpr int kHypothesisPolishIters = 5;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

double squared_cost(const CameraIntrinsics& k, const Pose& pose,
                    std::span<const Correspondence> corrs) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const Vec3 p = pose.apply(c.model_point);
    if (!(p.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const double du = k.fx * p.x() / p.z() + k.cx - c.image_point.x();
    const double dv = k.fy * p.y() / p.z() + k.cy - c.image_point.y();
    cost += du * du + dv * dv;
  }
  return cost;
}

}  // namespace

void RansacConfig::validate() const {
  if (!(inlier_threshold_px > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "inlier threshold must be positive");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence must lie in (0, 1)");
  }
}

double reprojection_error(const CameraIntrinsics& k, const Pose& pose,
                          const Correspondence& c) {
  const Vec3 p = pose.apply(c.model_point);
  if (!(p.z() > 0.0)) return std::numeric_limits<double>::infinity();
  const Vec2 uv(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
  return (uv - c.image_point).norm();
}

Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics& k) {
  const std::size_t n = corrs.size();
  if (n < kPnpMinimalSample) {
    throw Error(ErrorCode::kTooFewPoints,
                fmt::format("DLT needs >= {} correspondences, got {}",
                            kPnpMinimalSample, n));
  }

  Vec3 center = Vec3::Zero();
  for (const auto& c : corrs) center += c.model_point;
  center /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, 3);
  double mean_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (corrs[i].model_point - center).transpose();
    mean_dist += (corrs[i].model_point - center).norm();
  }
  mean_dist /= static_cast<double>(n);
  const Eigen::JacobiSVD<Eigen::MatrixXd> spread(centered);
  const Vec3 sv = spread.singularValues();
  if (!(sv[2] > kCoplanarRelativeSv * sv[0])) {
    throw Error(ErrorCode::kCoplanarDegenerate,
                fmt::format("model points are coplanar (singular values {:.3e}, {:.3e})",
                            sv[0], sv[2]));
  }

  // Similarity normalization X' = s (X - center) with mean distance sqrt(3).
  const double s = std::sqrt(3.0) / mean_dist;
  Eigen::Matrix4d normalizer = Eigen::Matrix4d::Identity();
  normalizer.topLeftCorner<3, 3>() *= s;
  normalizer.topRightCorner<3, 1>() = -s * center;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(n), 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d xh((s * (corrs[i].model_point - center)).homogeneous());
    const double x = (corrs[i].image_point.x() - k.cx) / k.fx;
    const double y = (corrs[i].image_point.y() - k.cy) / k.fy;
    const auto r = 2 * static_cast<Eigen::Index>(i);
    a.block<1, 4>(r, 0) = xh.transpose();
    a.block<1, 4>(r, 8) = -x * xh.transpose();
    a.block<1, 4>(r + 1, 4) = xh.transpose();
    a.block<1, 4>(r + 1, 8) = -y * xh.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& asv = svd.singularValues();
  if (!(asv[10] > kRankRelativeSv * asv[0])) {
    throw Error(ErrorCode::kRankDeficient, "DLT system has a multi-dimensional null space");
  }
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Mat34 p_normalized;
  p_normalized << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(),
      h.segment<4>(8).transpose();
  Mat34 p = p_normalized * normalizer;

  // Cheirality: the majority of points must have positive depth.
  std::size_t in_front = 0;
  for (const auto& c : corrs) {
    if (p.row(2).dot(c.model_point.homogeneous()) > 0.0) ++in_front;
  }
  if (2 * in_front < n) p = -p;

  const Mat3 m = p.leftCols<3>();
  const Eigen::JacobiSVD<Mat3> msvd(m);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kRankDeficient, "DLT solution has zero rotation block");
  }
  Pose pose;
  pose.rotation = nearest_rotation(m);
  pose.translation = p.col(3) / scale;
  return pose;
}

Pose pnp_refine(const Pose& init, std::span<const Correspondence> corrs,
                const CameraIntrinsics& k, int max_iters, double tol,
                RefineStats* stats) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kTooFewPoints,
                fmt::format("refinement needs >= 4 correspondences, got {}", corrs.size()));
  }
  Pose pose = init;
  double cost = squared_cost(k, pose, corrs);
  const double initial_cost = cost;
  int iter = 0;
  for (; iter < max_iters && cost > 0.0 && std::isfinite(cost); ++iter) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& c : corrs) {
      const Vec3 rx = pose.rotation * c.model_point;
      const Vec3 p = rx + pose.translation;
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz,
          -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpoint;
      dpoint << -skew(rx), Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dpoint;
      const Vec2 r(k.fx * p.x() * iz + k.cx - c.image_point.x(),
                   k.fy * p.y() * iz + k.cy - c.image_point.y());
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * r;
    }

    Eigen::LDLT<Mat6> ldlt(h);
    auto singular = [](const Eigen::LDLT<Mat6>& f) {
      const auto d = f.vectorD();
      return f.info() != Eigen::Success || !(d.minCoeff() > 1e-14 * d.maxCoeff());
    };
    if (singular(ldlt)) {
      const double lambda = 1e-6 * h.trace();
      ldlt.compute(h + lambda * Mat6::Identity());
      if (singular(ldlt) || !(lambda > 0.0)) {
        throw Error(ErrorCode::kSingularSystem,
                    fmt::format("singular normal equations at iteration {}", iter));
      }
    }
    const Vec6 delta = -ldlt.solve(g);
    if (!delta.allFinite()) {
      throw Error(ErrorCode::kSingularSystem,
                  fmt::format("non-finite update at iteration {}", iter));
    }

    Pose candidate;
    candidate.rotation = rotation_from_vector(delta.head<3>()) * pose.rotation;
    candidate.translation = pose.translation + delta.tail<3>();
    const double new_cost = squared_cost(k, candidate, corrs);
    if (!(new_cost < cost)) break;
    const double relative_decrease = (cost - new_cost) / cost;
    pose = candidate;
    cost = new_cost;
    if (relative_decrease < tol) {
      ++iter;
      break;
    }
  }
  if (stats) *stats = {initial_cost, cost, iter};
  return pose;
}

PnpResult pnp_ransac(std::span<const Correspondence> corrs,
                     const CameraIntrinsics& k, const RansacConfig& cfg) {
  cfg.validate();
  const std::size_t n = corrs.size();
  if (n < kPnpMinimalSample) {
    throw Error(ErrorCode::kTooFewPoints,
                fmt::format("PnP-RANSAC needs >= {} correspondences, got {}",
                            kPnpMinimalSample, n));
  }

  Pose best_pose;
  std::size_t best_count = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  long required = cfg.max_iterations;
  std::vector<std::size_t> pool(n);
  std::vector<Correspondence> sample(kPnpMinimalSample);
  int drawn = 0;

  for (long i = 0; i < required; ++i) {
    ++drawn;
    RngStream rng(cfg.seed, "pnp-ransac", static_cast<std::uint64_t>(i));
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t s = 0; s < kPnpMinimalSample; ++s) {
      const std::size_t pick = s + rng.uniform_index(n - s);
      std::swap(pool[s], pool[pick]);
      sample[s] = corrs[pool[s]];
    }

    Pose hypothesis;
    try {
      // The 6-point DLT fits 11 parameters to 12 equations and amplifies
      // pixel noise; a few Gauss-Newton steps on the same sample pull the
      // hypothesis onto SE(3)'s best fit before it is scored.
      hypothesis = pnp_refine(pnp_dlt(sample, k), sample, k, kHypothesisPolishIters);
    } catch (const Error&) {
      continue;
    }

    std::size_t count = 0;
    double sum = 0.0;
    for (const auto& c : corrs) {
      const double e = reprojection_error(k, hypothesis, c);
      if (e < cfg.inlier_threshold_px) {
        ++count;
        sum += e;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    if (count > best_count || (count == best_count && mean < best_mean)) {
      best_count = count;
      best_mean = mean;
      best_pose = hypothesis;

      // Stop once P(no all-inlier sample in `required` draws) < 1 - confidence.
      const double w = static_cast<double>(best_count) / static_cast<double>(n);
      const double all_inlier = std::pow(w, static_cast<double>(kPnpMinimalSample));
      if (all_inlier >= 1.0) {
        required = i + 1;
      } else {
        const double needed = std::log(1.0 - cfg.confidence) / std::log1p(-all_inlier);
        if (needed < static_cast<double>(cfg.max_iterations)) {
          required = std::min<long>(required, static_cast<long>(std::ceil(needed)));
        }
      }
    }
  }

  if (best_count < kPnpMinimalSample) {
    throw Error(ErrorCode::kConsensusFailure,
                fmt::format("best hypothesis has {} inliers after {} iterations",
                            best_count, drawn));
  }

  auto inliers_of = [&](const Pose& pose, std::vector<bool>& mask) {
    mask.assign(n, false);
    std::vector<Correspondence> subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (reprojection_error(k, pose, corrs[i]) < cfg.inlier_threshold_px) {
        mask[i] = true;
        subset.push_back(corrs[i]);
      }
    }
    return subset;
  };

  PnpResult result;
  result.iterations = drawn;
  result.pose = best_pose;
  std::vector<Correspondence> subset = inliers_of(result.pose, result.inlier_mask);
  for (int round = 0; round < kMaxInlierRounds; ++round) {
    const Pose refined = pnp_refine(result.pose, subset, k);
    std::vector<bool> mask;
    auto next = inliers_of(refined, mask);
    if (next.size() < kPnpMinimalSample) break;
    const bool unchanged = mask == result.inlier_mask;
    result.pose = refined;
    result.inlier_mask = std::move(mask);
    subset = std::move(next);
    if (unchanged) break;
  }

  double sum = 0.0;
  for (const auto& c : subset) sum += reprojection_error(k, result.pose, c);
  result.mean_reproj_err_px = sum / static_cast<double>(subset.size());
  return result;
}

}  // namespace pose_forge
