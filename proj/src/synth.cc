#include "pose_forge/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pose_forge/error.h"
#include "pose_forge/text_util.h"
#include "pose_forge/vfmt.h"

namespace pose_forge {
namespace {

// Seed of the procedural model; the model is a constant of the library.
constexpr std::uint64_t kDrillerSeed = 0x5eed'd211'1e75ULL;

struct Box {
  Vec3 lo, hi;
};

struct Cylinder {  // axis along +x
  double x0, x1, radius;
  double y, z;
};

double face_area(const Box& b, int axis) {
  const Vec3 d = b.hi - b.lo;
  return axis == 0 ? d.y() * d.z() : axis == 1 ? d.x() * d.z() : d.x() * d.y();
}

Vec3 sample_box_face(const Box& b, int face, RngStream& rng) {
  const int axis = face / 2;
  Vec3 p(rng.uniform(b.lo.x(), b.hi.x()), rng.uniform(b.lo.y(), b.hi.y()),
         rng.uniform(b.lo.z(), b.hi.z()));
  p[axis] = face % 2 == 0 ? b.lo[axis] : b.hi[axis];
  return p;
}

Vec3 gaussian_vec3(RngStream& rng) {
  const double x = rng.gaussian();
  const double y = rng.gaussian();
  const double z = rng.gaussian();
  return {x, y, z};
}

Vec3 random_unit_vec3(RngStream& rng) {
  for (;;) {
    const Vec3 v = gaussian_vec3(rng);
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

// Partial Fisher-Yates: the first k entries of the returned permutation.
std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
  }
  idx.resize(k);
  return idx;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("bad JSON in '{}': {}", path.string(), e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing '{}'", path.string()));
}

Tensor vector_tensor(const Eigen::VectorXd& v) {
  Tensor t{{static_cast<std::uint64_t>(v.size())}, {}};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v[i]));
  return t;
}

Eigen::VectorXd tensor_vector(const Tensor& t, const std::filesystem::path& path) {
  if (t.shape.size() != 1) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("'{}' must hold a rank-1 tensor", path.string()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.data.size()));
  for (std::size_t i = 0; i < t.data.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.data[i];
  return v;
}

}  // namespace

CameraIntrinsics default_camera() { return {500.0, 500.0, 320.0, 240.0, 640, 480}; }

ObjectModel make_driller_model(std::size_t n_points) {
  if (n_points == 0) throw Error(ErrorCode::kInvalidArgument, "model needs points");
  // Millimeters; x runs from the back of the motor housing to the chuck tip,
  // y points up out of the housing.
  const std::array<Box, 3> boxes = {{
      {{-90.0, 0.0, -30.0}, {70.0, 60.0, 30.0}},       // motor housing
      {{-60.0, -110.0, -22.0}, {-20.0, 0.0, 22.0}},    // grip
      {{-85.0, -140.0, -40.0}, {5.0, -110.0, 40.0}},   // battery
  }};
  const Cylinder chuck{70.0, 120.0, 18.0, 30.0, 0.0};

  // Surface elements: 6 faces per box, then the chuck mantle and front cap.
  std::vector<double> areas;
  for (const auto& b : boxes) {
    for (int f = 0; f < 6; ++f) areas.push_back(face_area(b, f / 2));
  }
  const double kPi = std::acos(-1.0);
  areas.push_back(2.0 * kPi * chuck.radius * (chuck.x1 - chuck.x0));
  areas.push_back(kPi * chuck.radius * chuck.radius);
  std::vector<double> cumulative(areas.size());
  std::partial_sum(areas.begin(), areas.end(), cumulative.begin());

  RngStream rng(kDrillerSeed, "driller-model");
  std::vector<Vec3> points;
  points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double pick = rng.uniform() * cumulative.back();
    const auto e = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    const std::size_t element = std::min(e, areas.size() - 1);
    if (element < 18) {
      points.push_back(sample_box_face(boxes[element / 6], static_cast<int>(element % 6), rng));
    } else if (element == 18) {
      const double x = rng.uniform(chuck.x0, chuck.x1);
      const double a = rng.uniform(0.0, 2.0 * kPi);
      points.emplace_back(x, chuck.y + chuck.radius * std::cos(a),
                          chuck.z + chuck.radius * std::sin(a));
    } else {
      // Uniform on the disk via sqrt radius.
      const double r = chuck.radius * std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * kPi);
      points.emplace_back(chuck.x1, chuck.y + r * std::cos(a), chuck.z + r * std::sin(a));
    }
  }
  const Vec3 c = centroid(points);
  for (auto& p : points) p -= c;
  return make_object_model("driller", std::move(points), false);
}

Pose sample_pose(RngStream& rng, const CameraIntrinsics& camera, double depth_min_mm,
                 double depth_max_mm, const Vec3& model_centroid) {
  Pose pose;
  for (;;) {
    const double w = rng.gaussian();
    const double x = rng.gaussian();
    const double y = rng.gaussian();
    const double z = rng.gaussian();
    if (w * w + x * x + y * y + z * z > 1e-24) {
      pose.rotation = quat_to_rotmat(Quaternion::from_components(w, x, y, z));
      break;
    }
  }
  const double depth = rng.uniform(depth_min_mm, depth_max_mm);
  const double u = rng.uniform(0.1 * camera.width, 0.9 * camera.width);
  const double v = rng.uniform(0.1 * camera.height, 0.9 * camera.height);
  const Vec3 c_cam(depth * (u - camera.cx) / camera.fx, depth * (v - camera.cy) / camera.fy,
                   depth);
  pose.translation = c_cam - pose.rotation * model_centroid;
  return pose;
}

Pose perturb_pose(const Pose& pose, double rot_deg, double trans_mm, RngStream& rng,
                  const Vec3& model_centroid) {
  const Mat3 a = axis_angle_rotation(random_unit_vec3(rng), deg_to_rad(rot_deg));
  const Vec3 delta = trans_mm * random_unit_vec3(rng);
  const Vec3 pivot = pose.apply(model_centroid);
  return {a * pose.rotation, a * (pose.translation - pivot) + pivot + delta};
}

std::size_t SceneConfig::visible_keypoints() const {
  const auto dropped =
      static_cast<std::size_t>(std::floor(occlusion_rate * static_cast<double>(n_keypoints)));
  return n_keypoints - std::min(dropped, n_keypoints);
}

void SceneConfig::validate() const {
  camera.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(n_keypoints >= 1, "n_keypoints must be >= 1");
  require(pixel_noise_sigma >= 0.0 && std::isfinite(pixel_noise_sigma),
          "pixel_noise_sigma must be >= 0");
  require(outlier_rate >= 0.0 && outlier_rate < 1.0, "outlier_rate must be in [0, 1)");
  require(occlusion_rate >= 0.0 && occlusion_rate < 1.0, "occlusion_rate must be in [0, 1)");
  require(depth_min_mm > 0.0 && depth_max_mm >= depth_min_mm && std::isfinite(depth_max_mm),
          "depth range must satisfy 0 < min <= max");
  require(cloud_noise_sigma >= 0.0 && std::isfinite(cloud_noise_sigma),
          "cloud_noise_sigma must be >= 0");
  require(feature_stride_px > 0.0 && std::isfinite(feature_stride_px),
          "feature_stride_px must be > 0");
  require(feature_dim >= 1, "feature_dim must be >= 1");
  require(descriptor_noise >= 0.0 && std::isfinite(descriptor_noise),
          "descriptor_noise must be >= 0");
  require(clip_feature_dim >= 7, "clip_feature_dim must be >= 7");
  require(clip_feature_noise >= 0.0 && std::isfinite(clip_feature_noise),
          "clip_feature_noise must be >= 0");
  if (visible_keypoints() < kPnpMinimalSample) {
    throw Error(ErrorCode::kConfigRejected,
                fmt::format("{} keypoints with occlusion_rate {} leave {} visible, need {}",
                            n_keypoints, occlusion_rate, visible_keypoints(),
                            kPnpMinimalSample));
  }
}

Scene generate_scene(const ObjectModel& model, const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.camera = cfg.camera;
  scene.keypoints = sample_keypoints(model, cfg.n_keypoints, cfg.seed);
  const std::size_t n = scene.keypoints.size();

  RngStream pose_rng(cfg.seed, "scene-pose");
  scene.gt_pose = sample_pose(pose_rng, cfg.camera, cfg.depth_min_mm, cfg.depth_max_mm,
                              centroid(model.points));

  // Occlusion.
  RngStream occ_rng(cfg.seed, "scene-occlusion");
  std::vector<bool> hidden(n, false);
  for (const auto i : choose_subset(n, n - cfg.visible_keypoints(), occ_rng)) hidden[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!hidden[i]) scene.keypoint_ids.push_back(i);
  }

  // Projections and pixel noise.
  RngStream noise_rng(cfg.seed, "scene-pixel-noise");
  for (const auto id : scene.keypoint_ids) {
    const Vec3& x = scene.keypoints.positions[id];
    const Vec2 clean = project(cfg.camera, scene.gt_pose, x);
    const double du = noise_rng.gaussian();
    const double dv = noise_rng.gaussian();
    scene.clean_projections.push_back(clean);
    scene.correspondences.push_back({x, clean + cfg.pixel_noise_sigma * Vec2(du, dv)});
  }

  // Outliers.
  const std::size_t visible = scene.keypoint_ids.size();
  const auto n_outliers =
      static_cast<std::size_t>(std::floor(cfg.outlier_rate * static_cast<double>(visible)));
  RngStream outlier_rng(cfg.seed, "scene-outliers");
  scene.outlier_mask.assign(visible, false);
  auto chosen = choose_subset(visible, n_outliers, outlier_rng);
  std::sort(chosen.begin(), chosen.end());
  for (const auto j : chosen) {
    scene.outlier_mask[j] = true;
    const double u = outlier_rng.uniform(0.0, cfg.camera.width);
    const double v = outlier_rng.uniform(0.0, cfg.camera.height);
    scene.correspondences[j].image_point = Vec2(u, v);
  }

  // Observed cloud.
  RngStream cloud_rng(cfg.seed, "scene-cloud");
  scene.observed_cloud.reserve(model.points.size());
  for (const auto& p : model.points) {
    scene.observed_cloud.push_back(scene.gt_pose.apply(p) +
                                   cfg.cloud_noise_sigma * gaussian_vec3(cloud_rng));
  }

  // Templates.
  const auto dim = static_cast<Eigen::Index>(cfg.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream t_rng(cfg.seed, "scene-template", i);
    Eigen::VectorXd d(dim);
    for (Eigen::Index k = 0; k < dim; ++k) d[k] = t_rng.gaussian();
    scene.templates.push_back(
        make_template(scene.keypoints.model_indices[i], scene.keypoints.positions[i], d));
  }

  // Feature map: random unit distractors, then planted templates.
  const double s = cfg.feature_stride_px;
  const auto grid_w = static_cast<std::size_t>(std::ceil(cfg.camera.width / s));
  const auto grid_h = static_cast<std::size_t>(std::ceil(cfg.camera.height / s));
  scene.feature_map = make_feature_map(grid_h, grid_w, cfg.feature_dim, s, Vec2(s / 2, s / 2),
                                       cfg.camera.width, cfg.camera.height, "synthetic");
  Eigen::VectorXd d(dim);
  for (std::size_t r = 0; r < grid_h; ++r) {
    RngStream row_rng(cfg.seed, "scene-distractors", r);
    for (std::size_t c = 0; c < grid_w; ++c) {
      for (Eigen::Index k = 0; k < dim; ++k) d[k] = row_rng.gaussian();
      d /= d.norm();
      auto out = scene.feature_map.descriptor(r, c);
      for (Eigen::Index k = 0; k < dim; ++k) out[static_cast<std::size_t>(k)] = static_cast<float>(d[k]);
    }
  }
  std::map<std::size_t, Eigen::VectorXd> planted;  // patch index -> summed templates
  for (std::size_t j = 0; j < visible; ++j) {
    const Vec2& p = scene.correspondences[j].image_point;
    const double col = std::floor(p.x() / s);
    const double row = std::floor(p.y() / s);
    if (col < 0 || row < 0 || col >= static_cast<double>(grid_w) ||
        row >= static_cast<double>(grid_h)) {
      continue;  // projects outside the image: nothing to plant
    }
    const std::size_t patch = static_cast<std::size_t>(row) * grid_w + static_cast<std::size_t>(col);
    const auto& desc = scene.templates[scene.keypoint_ids[j]].descriptor;
    auto [it, inserted] = planted.try_emplace(patch, Eigen::VectorXd::Zero(dim));
    it->second += desc;
  }
  for (auto& [patch, sum] : planted) {
    RngStream n_rng(cfg.seed, "scene-descriptor-noise", patch);
    const double norm = sum.norm();
    if (norm > 0.0) sum /= norm;
    for (Eigen::Index k = 0; k < dim; ++k) sum[k] += cfg.descriptor_noise * n_rng.gaussian();
    float* out = scene.feature_map.data.data() + patch * cfg.feature_dim;
    for (Eigen::Index k = 0; k < dim; ++k) out[k] = static_cast<float>(sum[k]);
  }

  // Global features for the regression branch.
  const RegressionEmbedding embedding(cfg.embedding_seed, cfg.clip_feature_dim);
  Eigen::VectorXd f = embedding.encode(scene.gt_pose);
  RngStream f_rng(cfg.seed, "scene-global-noise");
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] += cfg.clip_feature_noise * f_rng.gaussian();
  std::tie(scene.visual, scene.semantic) = embedding.split(f);
  return scene;
}

RegressionEmbedding::RegressionEmbedding(std::uint64_t seed, std::size_t dim) {
  if (dim < 7) throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 7");
  matrix_.resize(static_cast<Eigen::Index>(dim), 7);
  RngStream rng(seed, "regression-embedding");
  const double scale = 1.0 / std::sqrt(7.0);
  for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
    for (Eigen::Index c = 0; c < 7; ++c) matrix_(r, c) = scale * rng.gaussian();
  }
}

Eigen::VectorXd RegressionEmbedding::encode(const Pose& pose) const {
  Eigen::Matrix<double, 7, 1> y;
  y << rotmat_to_quat(pose.rotation).coeffs(), pose.translation / 1000.0;
  return matrix_ * y;
}

std::pair<FeatureVector, FeatureVector> RegressionEmbedding::split(
    const Eigen::VectorXd& features) const {
  const Eigen::Index half = (features.size() + 1) / 2;
  return {FeatureVector{features.head(half), FeatureRole::kVisual},
          FeatureVector{features.tail(features.size() - half), FeatureRole::kSemantic}};
}

std::vector<RegressionSample> generate_regression_dataset(std::uint64_t seed, std::size_t n,
                                                          std::size_t dim, double noise_sigma) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "dataset needs at least one sample");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise must be >= 0");
  const RegressionEmbedding embedding(seed, dim);
  const CameraIntrinsics camera = default_camera();
  std::vector<RegressionSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream pose_rng(seed, "regression-pose", i);
    Pose gt = sample_pose(pose_rng, camera, 800.0, 1200.0);
    // Store the rotation of the canonical quaternion so targets are exact.
    gt.rotation = quat_to_rotmat(rotmat_to_quat(gt.rotation));
    Eigen::VectorXd f = embedding.encode(gt);
    RngStream noise_rng(seed, "regression-noise", i);
    for (Eigen::Index k = 0; k < f.size(); ++k) f[k] += noise_sigma * noise_rng.gaussian();
    auto [visual, semantic] = embedding.split(f);
    out.push_back({std::move(visual), std::move(semantic), gt});
  }
  return out;
}

void write_pose_json(const std::filesystem::path& path, const Pose& pose) {
  nlohmann::ordered_json j;
  j["R"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    j["R"].push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
  }
  j["t"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  write_text(path, j.dump(2) + "\n");
}

Pose read_pose_json(const std::filesystem::path& path) {
  const auto j = read_json(path);
  Pose pose;
  try {
    const auto r = j.at("R").get<std::vector<std::vector<double>>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 3 || t.size() != 3) throw Error(ErrorCode::kMalformedHeader, "pose shape");
    for (int i = 0; i < 3; ++i) {
      if (r[i].size() != 3) throw Error(ErrorCode::kMalformedHeader, "pose shape");
      for (int k = 0; k < 3; ++k) pose.rotation(i, k) = r[i][k];
      pose.translation[i] = t[i];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("bad pose in '{}': {}", path.string(), e.what()));
  } catch (const Error&) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("'{}' needs a 3x3 \"R\" and a 3-vector \"t\"", path.string()));
  }
  check_rotation(pose.rotation);
  return pose;
}

std::vector<std::string> write_scene(const std::filesystem::path& dir, const Scene& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, fmt::format("cannot create '{}'", dir.string()));

  std::string csv = "kp_index,X,Y,Z,u,v,is_outlier\n";
  for (std::size_t j = 0; j < scene.correspondences.size(); ++j) {
    const auto& c = scene.correspondences[j];
    csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", scene.keypoint_ids[j],
                       c.model_point.x(), c.model_point.y(), c.model_point.z(),
                       c.image_point.x(), c.image_point.y(), scene.outlier_mask[j] ? 1 : 0);
  }
  write_text(dir / "correspondences.csv", csv);
  write_xyz_points(dir / "cloud.xyz", scene.observed_cloud);
  write_feature_map(dir / "features.vfmt", scene.feature_map);

  Tensor templates{{scene.templates.size(),
                    scene.templates.empty() ? 0 : static_cast<std::uint64_t>(
                                                      scene.templates[0].descriptor.size())},
                   {}};
  nlohmann::ordered_json tmeta;
  tmeta["model_indices"] = nlohmann::json::array();
  tmeta["positions"] = nlohmann::json::array();
  for (const auto& t : scene.templates) {
    for (Eigen::Index k = 0; k < t.descriptor.size(); ++k) {
      templates.data.push_back(static_cast<float>(t.descriptor[k]));
    }
    tmeta["model_indices"].push_back(t.model_index);
    tmeta["positions"].push_back({t.position.x(), t.position.y(), t.position.z()});
  }
  write_tensor_file(dir / "templates.vfmt", templates);
  write_text(sidecar_path(dir / "templates.vfmt"), tmeta.dump(2) + "\n");

  write_tensor_file(dir / "visual.vfmt", vector_tensor(scene.visual.values));
  write_tensor_file(dir / "semantic.vfmt", vector_tensor(scene.semantic.values));

  nlohmann::ordered_json cam;
  cam["fx"] = scene.camera.fx;
  cam["fy"] = scene.camera.fy;
  cam["cx"] = scene.camera.cx;
  cam["cy"] = scene.camera.cy;
  cam["width"] = scene.camera.width;
  cam["height"] = scene.camera.height;
  write_text(dir / "camera.json", cam.dump(2) + "\n");
  write_pose_json(dir / "gt_pose.json", scene.gt_pose);

  return {"correspondences.csv", "cloud.xyz",           "features.vfmt",
          "features.meta.json",  "templates.vfmt",      "templates.meta.json",
          "visual.vfmt",         "semantic.vfmt",       "camera.json",
          "gt_pose.json"};
}

Scene read_scene(const std::filesystem::path& dir) {
  Scene scene;
  const auto cam = read_json(dir / "camera.json");
  try {
    scene.camera = {cam.at("fx").get<double>(), cam.at("fy").get<double>(),
                    cam.at("cx").get<double>(), cam.at("cy").get<double>(),
                    cam.at("width").get<int>(), cam.at("height").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("bad camera.json: {}", e.what()));
  }
  scene.camera.validate();
  scene.gt_pose = read_pose_json(dir / "gt_pose.json");

  const Tensor templates = read_tensor_file(dir / "templates.vfmt");
  const auto tmeta = read_json(sidecar_path(dir / "templates.vfmt"));
  if (templates.shape.size() != 2) {
    throw Error(ErrorCode::kLengthMismatch, "templates.vfmt must be rank 2");
  }
  try {
    const auto indices = tmeta.at("model_indices").get<std::vector<std::size_t>>();
    const auto positions = tmeta.at("positions").get<std::vector<std::array<double, 3>>>();
    if (indices.size() != templates.shape[0] || positions.size() != templates.shape[0]) {
      throw Error(ErrorCode::kLengthMismatch, "templates.meta.json does not match templates.vfmt");
    }
    const auto dim = static_cast<Eigen::Index>(templates.shape[1]);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const Vec3 pos(positions[i][0], positions[i][1], positions[i][2]);
      Eigen::VectorXd d(dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        d[k] = templates.data[i * templates.shape[1] + static_cast<std::size_t>(k)];
      }
      scene.templates.push_back(make_template(indices[i], pos, d));
      scene.keypoints.model_indices.push_back(indices[i]);
      scene.keypoints.positions.push_back(pos);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("bad templates.meta.json: {}", e.what()));
  }

  const std::string csv = read_text(dir / "correspondences.csv");
  std::istringstream lines(csv);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto t = trim(line);
    if (line_no == 1) {
      if (t != "kp_index,X,Y,Z,u,v,is_outlier") {
        throw Error(ErrorCode::kMalformedHeader, "correspondences.csv: unexpected header", 1);
      }
      continue;
    }
    if (t.empty()) continue;
    const auto f = split_char(t, ',');
    if (f.size() != 7) {
      throw Error(ErrorCode::kMalformedHeader,
                  fmt::format("correspondences.csv:{}: expected 7 fields", line_no), line_no);
    }
    const auto id = parse_size(f[0]);
    std::array<double, 5> v{};
    for (int k = 0; k < 5; ++k) {
      const auto x = parse_double(f[1 + k]);
      if (!x) {
        throw Error(ErrorCode::kNonNumericValue,
                    fmt::format("correspondences.csv:{}: non-numeric field", line_no), line_no);
      }
      v[k] = *x;
    }
    const auto outlier = parse_size(f[6]);
    if (!id || *id >= scene.keypoints.size() || !outlier || *outlier > 1) {
      throw Error(ErrorCode::kNonNumericValue,
                  fmt::format("correspondences.csv:{}: bad index or flag", line_no), line_no);
    }
    scene.keypoint_ids.push_back(*id);
    scene.correspondences.push_back({Vec3(v[0], v[1], v[2]), Vec2(v[3], v[4])});
    scene.outlier_mask.push_back(*outlier == 1);
    scene.clean_projections.push_back(
        project(scene.camera, scene.gt_pose, scene.keypoints.positions[*id]));
  }

  scene.observed_cloud = read_xyz_points(dir / "cloud.xyz");
  scene.feature_map = load_feature_map(dir / "features.vfmt");
  scene.visual = {tensor_vector(read_tensor_file(dir / "visual.vfmt"), dir / "visual.vfmt"),
                  FeatureRole::kVisual};
  scene.semantic = {
      tensor_vector(read_tensor_file(dir / "semantic.vfmt"), dir / "semantic.vfmt"),
      FeatureRole::kSemantic};
  return scene;
}

}  // namespace pose_forge
