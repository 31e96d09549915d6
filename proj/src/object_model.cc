#include "pose_forge/object_model.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "pose_forge/error.h"
#include "pose_forge/text_util.h"

namespace pose_forge {
namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kMissingFile,
                fmt::format("cannot open '{}'", path.string()));
  }
  return in;
}

[[noreturn]] void throw_header(const std::filesystem::path& path,
                               std::size_t line, std::string_view what) {
  throw Error(ErrorCode::kMalformedHeader,
              fmt::format("{}:{}: malformed PLY header: {}", path.string(),
                          line, what),
              line);
}

[[noreturn]] void throw_value(const std::filesystem::path& path,
                              std::size_t line, std::string_view what) {
  throw Error(ErrorCode::kNonNumericValue,
              fmt::format("{}:{}: {}", path.string(), line, what), line);
}

Vec3 parse_triple(const std::filesystem::path& path, std::size_t line_no,
                  std::span<const std::string_view> fields, std::size_t ix,
                  std::size_t iy, std::size_t iz) {
  Vec3 p;
  const std::size_t idx[3] = {ix, iy, iz};
  for (int a = 0; a < 3; ++a) {
    if (idx[a] >= fields.size()) {
      throw_value(path, line_no, "too few values on vertex line");
    }
    const auto v = parse_double(fields[idx[a]]);
    if (!v || !std::isfinite(*v)) {
      throw_value(path, line_no,
                  fmt::format("non-numeric vertex value '{}'", fields[idx[a]]));
    }
    p[a] = *v;
  }
  return p;
}

ObjectModel load_ply(const std::filesystem::path& path, std::istream& in,
                     bool symmetric) {
  std::string line;
  std::size_t line_no = 1;  // "ply" already consumed
  std::optional<std::size_t> vertex_count;
  bool in_vertex_element = false;
  std::size_t vertex_property_count = 0;
  std::optional<std::size_t> ix, iy, iz;
  bool saw_format = false;
  bool vertex_element_first = false;
  bool seen_any_element = false;
  bool ended = false;

  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    const std::string_view key = fields[0];
    if (key == "comment" || key == "obj_info") continue;
    if (key == "end_header") {
      ended = true;
      break;
    }
    if (key == "format") {
      if (fields.size() < 2 || fields[1] != "ascii") {
        throw_header(path, line_no, "only 'format ascii 1.0' is supported");
      }
      saw_format = true;
    } else if (key == "element") {
      if (fields.size() != 3) throw_header(path, line_no, "bad element line");
      in_vertex_element = fields[1] == "vertex";
      if (in_vertex_element) {
        const auto n = parse_size(fields[2]);
        if (!n) throw_header(path, line_no, "bad vertex count");
        vertex_count = *n;
        vertex_element_first = !seen_any_element;
      }
      seen_any_element = true;
    } else if (key == "property") {
      if (!seen_any_element) throw_header(path, line_no, "property before element");
      if (!in_vertex_element) continue;
      if (fields.size() < 3) throw_header(path, line_no, "bad property line");
      if (fields[1] == "list") {
        throw_header(path, line_no, "list property on vertex element");
      }
      const std::string_view name = fields.back();
      if (name == "x") ix = vertex_property_count;
      if (name == "y") iy = vertex_property_count;
      if (name == "z") iz = vertex_property_count;
      ++vertex_property_count;
    } else {
      throw_header(path, line_no, fmt::format("unknown keyword '{}'", key));
    }
  }
  if (!ended) throw_header(path, line_no, "missing end_header");
  if (!saw_format) throw_header(path, line_no, "missing format line");
  if (!vertex_count) throw_header(path, line_no, "missing 'element vertex'");
  if (!ix || !iy || !iz) throw_header(path, line_no, "vertex lacks x/y/z properties");
  if (!vertex_element_first) {
    throw_header(path, line_no, "vertex element must come first");
  }
  if (*vertex_count == 0) {
    throw Error(ErrorCode::kZeroVertices,
                fmt::format("{}:{}: PLY declares zero vertices", path.string(), line_no),
                line_no);
  }

  std::vector<Vec3> points;
  points.reserve(*vertex_count);
  while (points.size() < *vertex_count) {
    if (!std::getline(in, line)) {
      throw_value(path, line_no + 1,
                  fmt::format("expected {} vertices, file ends after {}",
                              *vertex_count, points.size()));
    }
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.size() < vertex_property_count) {
      throw_value(path, line_no, "too few values on vertex line");
    }
    points.push_back(parse_triple(path, line_no, fields, *ix, *iy, *iz));
  }
  return make_object_model(path.stem().string(), std::move(points), symmetric);
}

std::vector<Vec3> parse_xyz_stream(const std::filesystem::path& path,
                                   std::istream& in, std::size_t first_line_no,
                                   std::optional<std::string> first_line) {
  std::vector<Vec3> points;
  std::size_t line_no = first_line_no;
  std::string line;
  auto handle = [&](const std::string& text) {
    const auto fields = split_whitespace(text);
    if (fields.empty() || fields[0].starts_with('#')) return;
    if (fields.size() != 3) {
      throw_value(path, line_no,
                  fmt::format("expected 3 values, found {}", fields.size()));
    }
    points.push_back(parse_triple(path, line_no, fields, 0, 1, 2));
  };
  if (first_line) handle(*first_line);
  while (std::getline(in, line)) {
    ++line_no;
    handle(line);
  }
  return points;
}

}  // namespace

ObjectModel make_object_model(std::string name, std::vector<Vec3> points,
                              bool symmetric) {
  if (points.empty()) {
    throw Error(ErrorCode::kZeroVertices, "object model has no points");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "object model has non-finite points");
    }
  }
  ObjectModel model{std::move(name), std::move(points), symmetric, 0.0};
  model.diameter = compute_diameter(model.points);
  return model;
}

double compute_diameter(std::span<const Vec3> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

Vec3 centroid(std::span<const Vec3> points) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return points.empty() ? sum : Vec3(sum / static_cast<double>(points.size()));
}

ObjectModel load_model(const std::filesystem::path& path, bool symmetric) {
  auto in = open_or_throw(path);
  std::string first;
  if (!std::getline(in, first)) {
    throw Error(ErrorCode::kZeroVertices,
                fmt::format("{}: file is empty", path.string()), 1);
  }
  if (trim(first) == "ply") return load_ply(path, in, symmetric);
  auto points = parse_xyz_stream(path, in, 1, first);
  if (points.empty()) {
    throw Error(ErrorCode::kZeroVertices,
                fmt::format("{}: no vertices", path.string()));
  }
  return make_object_model(path.stem().string(), std::move(points), symmetric);
}

std::vector<Vec3> read_xyz_points(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  auto points = parse_xyz_stream(path, in, 0, std::nullopt);
  if (points.empty()) {
    throw Error(ErrorCode::kZeroVertices,
                fmt::format("{}: no points", path.string()));
  }
  return points;
}

void write_xyz_points(const std::filesystem::path& path,
                      std::span<const Vec3> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  for (const auto& p : points) {
    out << fmt::format("{:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
  }
}

void write_ply(const std::filesystem::path& path, const ObjectModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out << "ply\nformat ascii 1.0\n";
  out << fmt::format("comment {}\n", model.name);
  out << fmt::format("element vertex {}\n", model.points.size());
  out << "property float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : model.points) {
    out << fmt::format("{:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
  }
}

KeypointSet sample_keypoints(const ObjectModel& model, std::size_t n,
                             std::uint64_t /*seed*/) {
  const std::size_t m = model.points.size();
  if (n < 1 || n > m) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("keypoint count {} outside [1, {}]", n, m));
  }
  const Vec3 c = centroid(model.points);
  std::size_t first = 0;
  double first_dist = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = (model.points[i] - c).squaredNorm();
    if (d > first_dist) {
      first_dist = d;
      first = i;
    }
  }

  std::vector<std::size_t> chosen{first};
  std::vector<double> min_dist(m, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(m, false);
  taken[first] = true;
  while (chosen.size() < n) {
    const Vec3& last = model.points[chosen.back()];
    std::size_t best = m;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      min_dist[i] = std::min(min_dist[i], (model.points[i] - last).squaredNorm());
      if (!taken[i] && min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    taken[best] = true;
    chosen.push_back(best);
  }
  return keypoints_from_indices(model, chosen);
}

KeypointSet keypoints_from_indices(const ObjectModel& model,
                                   std::span<const std::size_t> indices) {
  KeypointSet set;
  std::vector<bool> seen(model.points.size(), false);
  for (const std::size_t i : indices) {
    if (i >= model.points.size() || seen[i]) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("keypoint index {} repeated or out of range", i));
    }
    seen[i] = true;
    set.model_indices.push_back(i);
    set.positions.push_back(model.points[i]);
  }
  return set;
}

}  // namespace pose_forge
