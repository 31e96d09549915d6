#include "pose_forge/feature_match.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pose_forge/error.h"
#include "pose_forge/vfmt.h"

namespace pose_forge {

void DenseFeatureMap::validate() const {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "feature dim must be > 0");
  if (!(stride_px > 0.0)) throw Error(ErrorCode::kInvalidArgument, "stride must be > 0");
  if (data.size() != grid_h * grid_w * dim) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("feature map {}x{}x{} but {} values", grid_h, grid_w, dim,
                            data.size()));
  }
  for (const float f : data) {
    if (!std::isfinite(f)) throw Error(ErrorCode::kNonFinite, "non-finite feature value");
  }
}

DenseFeatureMap make_feature_map(std::size_t grid_h, std::size_t grid_w,
                                 std::size_t dim, double stride_px, Vec2 origin_px,
                                 int image_width, int image_height, std::string model) {
  DenseFeatureMap map;
  map.grid_h = grid_h;
  map.grid_w = grid_w;
  map.dim = dim;
  map.stride_px = stride_px;
  map.origin_px = origin_px;
  map.image_width = image_width;
  map.image_height = image_height;
  map.model = std::move(model);
  map.data.assign(grid_h * grid_w * dim, 0.0f);
  map.validate();
  return map;
}

DenseFeatureMap load_feature_map(const std::filesystem::path& path) {
  Tensor t = read_tensor_file(path);
  if (t.shape.size() != 3) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("feature map must be rank 3, '{}' has rank {}", path.string(),
                            t.shape.size()));
  }
  const auto meta_path = sidecar_path(path);
  std::ifstream in(meta_path);
  if (!in) {
    throw Error(ErrorCode::kMissingFile,
                fmt::format("missing sidecar '{}'", meta_path.string()));
  }
  DenseFeatureMap map;
  try {
    const auto meta = nlohmann::json::parse(in);
    map.stride_px = meta.at("stride_px").get<double>();
    const auto origin = meta.at("origin_px").get<std::vector<double>>();
    const auto size = meta.at("image_size").get<std::vector<int>>();
    if (origin.size() != 2 || size.size() != 2) {
      throw Error(ErrorCode::kMalformedHeader, "origin_px and image_size need 2 entries");
    }
    map.origin_px = Vec2(origin[0], origin[1]);
    map.image_width = size[0];
    map.image_height = size[1];
    map.model = meta.value("model", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("bad sidecar '{}': {}", meta_path.string(), e.what()));
  }
  map.grid_h = t.shape[0];
  map.grid_w = t.shape[1];
  map.dim = t.shape[2];
  map.data = std::move(t.data);
  map.validate();
  return map;
}

void write_feature_map(const std::filesystem::path& path, const DenseFeatureMap& map) {
  map.validate();
  write_tensor_file(path, Tensor{{map.grid_h, map.grid_w, map.dim}, map.data});
  nlohmann::ordered_json meta;
  meta["stride_px"] = map.stride_px;
  meta["origin_px"] = {map.origin_px.x(), map.origin_px.y()};
  meta["image_size"] = {map.image_width, map.image_height};
  meta["model"] = map.model;
  std::ofstream out(sidecar_path(path), std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write feature-map sidecar");
  out << meta.dump(2) << '\n';
}

KeypointTemplate make_template(std::size_t model_index, const Vec3& position,
                               Eigen::VectorXd descriptor) {
  const double norm = descriptor.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kDegenerateInput, "template descriptor has zero norm");
  }
  return {model_index, position, descriptor / norm};
}

std::vector<std::optional<Detection>> match_keypoints(
    const DenseFeatureMap& map, std::span<const KeypointTemplate> templates,
    double min_score) {
  for (const auto& t : templates) {
    if (static_cast<std::size_t>(t.descriptor.size()) != map.dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("template dim {} vs feature dim {}", t.descriptor.size(),
                              map.dim));
    }
  }
  const std::size_t patches = map.grid_h * map.grid_w;
  const auto dim = static_cast<Eigen::Index>(map.dim);

  // Normalize every patch once: row p of `unit` is patch p / ||patch p||.
  Eigen::MatrixXd unit(static_cast<Eigen::Index>(patches), dim);
  for (std::size_t p = 0; p < patches; ++p) {
    const Eigen::Map<const Eigen::VectorXf> d(map.data.data() + p * map.dim, dim);
    const Eigen::VectorXd v = d.cast<double>();
    const double norm = v.norm();
    unit.row(static_cast<Eigen::Index>(p)) =
        norm > 0.0 ? Eigen::RowVectorXd(v.transpose() / norm) : Eigen::RowVectorXd::Zero(dim);
  }

  std::vector<std::optional<Detection>> out;
  out.reserve(templates.size());
  for (const auto& t : templates) {
    if (patches == 0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    const Eigen::VectorXd scores = unit * t.descriptor;
    Eigen::Index best = 0;
    for (Eigen::Index p = 1; p < scores.size(); ++p) {
      if (scores[p] > scores[best]) best = p;
    }
    if (scores[best] < min_score) {
      out.emplace_back(std::nullopt);
      continue;
    }
    const auto row = static_cast<std::size_t>(best) / map.grid_w;
    const auto col = static_cast<std::size_t>(best) % map.grid_w;
    out.emplace_back(Detection{map.patch_center(row, col),
                               std::clamp(scores[best], -1.0, 1.0), row, col});
  }
  return out;
}

std::vector<Correspondence> build_correspondences(
    std::span<const std::optional<Detection>> detections, const KeypointSet& keypoints) {
  if (detections.size() != keypoints.size()) {
    throw Error(ErrorCode::kSizeMismatch,
                fmt::format("{} detections for {} keypoints", detections.size(),
                            keypoints.size()));
  }
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i]) out.push_back({keypoints.positions[i], detections[i]->image_point});
  }
  if (out.size() < kPnpMinimalSample) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                fmt::format("{} correspondences survive matching, PnP needs {}", out.size(),
                            kPnpMinimalSample));
  }
  return out;
}

}  // namespace pose_forge
