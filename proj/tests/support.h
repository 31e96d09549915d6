// Shared test helpers. The oracles here are written independently of the
// library code they check (Eigen's AngleAxis for rotations, plain loops for
// distances).
#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Geometry>

#include "pose_forge/geometry.h"
#include "pose_forge/object_model.h"
#include "pose_forge/rng.h"

namespace pf_test {

using pose_forge::Mat3;
using pose_forge::Pose;
using pose_forge::Vec3;

inline constexpr double kPi = 3.14159265358979323846;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pose_forge_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Rotation about the z axis via Eigen, independent of the library's Rodrigues.
inline Mat3 rot_z_deg(double deg) {
  return Eigen::AngleAxisd(deg * kPi / 180.0, Vec3::UnitZ()).toRotationMatrix();
}

inline Vec3 random_unit(pose_forge::RngStream& rng) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double n = v.norm();
    if (n > 0.1 && n <= 1.0) return v / n;
  }
}

inline Mat3 random_rotation(pose_forge::RngStream& rng) {
  return Eigen::AngleAxisd(rng.uniform(0.0, kPi), random_unit(rng)).toRotationMatrix();
}

inline Pose random_pose(pose_forge::RngStream& rng, double trans_scale = 100.0) {
  Pose p;
  p.rotation = random_rotation(rng);
  p.translation = Vec3(rng.uniform(-trans_scale, trans_scale),
                       rng.uniform(-trans_scale, trans_scale),
                       rng.uniform(-trans_scale, trans_scale));
  return p;
}

inline std::vector<Vec3> random_points(pose_forge::RngStream& rng, std::size_t n,
                                       double scale = 100.0) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                     rng.uniform(-scale, scale));
  }
  return pts;
}

inline std::vector<Vec3> unit_cube() {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  return pts;
}

// Brute-force ADD and ADD-S oracles.
inline double oracle_add(const std::vector<Vec3>& pts, const Pose& pred, const Pose& gt) {
  double sum = 0.0;
  for (const auto& x : pts) {
    const Vec3 a = pred.rotation * x + pred.translation;
    const Vec3 b = gt.rotation * x + gt.translation;
    sum += std::sqrt((a - b).dot(a - b));
  }
  return sum / static_cast<double>(pts.size());
}

inline double oracle_adds(const std::vector<Vec3>& pts, const Pose& pred, const Pose& gt) {
  double sum = 0.0;
  for (const auto& x : pts) {
    const Vec3 a = pred.rotation * x + pred.translation;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : pts) {
      const Vec3 b = gt.rotation * y + gt.translation;
      best = std::min(best, (a - b).norm());
    }
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

// Geodesic angle via Eigen's AngleAxis of the relative rotation.
inline double oracle_angle_deg(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle() * 180.0 / kPi;
}

}  // namespace pf_test
