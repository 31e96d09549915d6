#include "pose_forge/geometry.h"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pose_forge/error.h"

namespace pose_forge {

Quaternion Quaternion::from_components(double w, double x, double y,
                                       double z) {
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) ||
      !std::isfinite(z)) {
    throw Error(ErrorCode::kDegenerateInput, "quaternion has non-finite components");
  }
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  if (norm == 0.0) {
    throw Error(ErrorCode::kDegenerateInput, "all-zero quaternion");
  }
  return Quaternion(w / norm, x / norm, y / norm, z / norm);
}

Quaternion Quaternion::from_vector(const Vec4& wxyz) {
  return from_components(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
}

Quaternion Quaternion::canonical() const {
  for (const double c : {w_, x_, y_, z_}) {
    if (c > 0.0) return *this;
    if (c < 0.0) return -*this;
  }
  return *this;
}

Quaternion Quaternion::operator-() const { return Quaternion(-w_, -x_, -y_, -z_); }

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "principal point must lie strictly inside the image");
  }
}

bool is_rotation(const Mat3& r, double tolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

void check_rotation(const Mat3& r) {
  if (!is_rotation(r)) {
    throw Error(ErrorCode::kInvalidRotation,
                fmt::format("matrix is not a rotation (det = {:.3e})", r.determinant()));
  }
}

Mat3 quat_to_rotmat(const Quaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quaternion rotmat_to_quat(const Mat3& r) {
  check_rotation(r);
  // Shepperd: pick the largest of (w, x, y, z) magnitudes to divide by.
  const double trace = r.trace();
  double w, x, y, z;
  if (trace >= r(0, 0) && trace >= r(1, 1) && trace >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  return Quaternion::from_components(w, x, y, z).canonical();
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose invert(const Pose& p) {
  const Mat3 rt = p.rotation.transpose();
  return {rt, -(rt * p.translation)};
}

Vec2 project(const CameraIntrinsics& k, const Pose& p, const Vec3& x) {
  const Vec3 c = p.apply(x);
  if (!(c.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera,
                fmt::format("point has camera depth {:.6g} <= 0", c.z()));
  }
  return {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy};
}

double rotation_geodesic_deg(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return rad_to_deg(std::acos(c));
}

double translation_error_mm(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

Mat3 axis_angle_rotation(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Mat3 rotation_from_vector(const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, rotation_vector / angle).toRotationMatrix();
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace pose_forge
