#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pose_forge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Max-norm tolerance on R^T R - I and on det(R) - 1.
inline constexpr double kRotationTolerance = 1e-9;

// Unit quaternion, component order (w, x, y, z). Construction always
// normalizes; the sign is left alone so that q and -q stay distinguishable
// where a caller needs that (e.g. a regression output). Use canonical() for
// the w >= 0 representative.
class Quaternion {
 public:
  Quaternion() = default;

  // Throws kDegenerateInput on an all-zero or non-finite 4-vector.
  static Quaternion from_components(double w, double x, double y, double z);
  static Quaternion from_vector(const Vec4& wxyz);
  static Quaternion identity() { return Quaternion(); }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Vec4 coeffs() const { return {w_, x_, y_, z_}; }

  // w >= 0; when w == 0 the first nonzero of (x, y, z) is positive.
  Quaternion canonical() const;
  Quaternion operator-() const;

 private:
  Quaternion(double w, double x, double y, double z)
      : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

// Rigid transform x -> R x + t. Translation in millimeters.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

// Pinhole camera; image origin at the top-left pixel corner, u right, v down.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument unless fx, fy > 0, 0 < cx < width, 0 < cy < height.
  void validate() const;
};

bool is_rotation(const Mat3& r, double tolerance = kRotationTolerance);
// Throws kInvalidRotation when `r` is not in SO(3) within tolerance.
void check_rotation(const Mat3& r);

Mat3 quat_to_rotmat(const Quaternion& q);
Quaternion rotmat_to_quat(const Mat3& r);

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

// Throws kBehindCamera when the camera-frame depth is not positive.
Vec2 project(const CameraIntrinsics& k, const Pose& p, const Vec3& x);

double rotation_geodesic_deg(const Mat3& a, const Mat3& b);
double translation_error_mm(const Vec3& a, const Vec3& b);

// Rodrigues rotation; `axis` need not be normalized.
Mat3 axis_angle_rotation(const Vec3& axis, double angle_rad);
Mat3 rotation_from_vector(const Vec3& rotation_vector);
// Closest rotation in Frobenius norm, det forced to +1.
Mat3 nearest_rotation(const Mat3& m);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace pose_forge
