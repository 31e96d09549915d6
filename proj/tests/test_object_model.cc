#include <doctest.h>

#include <cmath>
#include <set>

#include "pose_forge/error.h"
#include "pose_forge/object_model.h"
#include "support.h"

using namespace pose_forge;

namespace {

struct Caught {
  ErrorCode code;
  std::optional<std::size_t> line;
};

Caught catch_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {e.code(), e.line()};
  }
  FAIL("expected an Error");
  return {ErrorCode::kIo, std::nullopt};
}

const char* kCubePly =
    "ply\n"
    "format ascii 1.0\n"
    "comment unit cube\n"
    "element vertex 8\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "element face 0\n"
    "property list uchar int vertex_indices\n"
    "end_header\n"
    "0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n";

double brute_diameter(const std::vector<Vec3>& pts) {
  double best = 0.0;
  for (const auto& a : pts) {
    for (const auto& b : pts) best = std::max(best, (a - b).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("PLY unit cube") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cube.ply", kCubePly);
  const ObjectModel m = load_model(dir / "cube.ply");
  CHECK(m.points.size() == 8);
  CHECK(m.diameter == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(m.diameter == brute_diameter(pf_test::unit_cube()));
  CHECK(m.name == "cube");
  CHECK_FALSE(m.symmetric);
  CHECK(load_model(dir / "cube.ply", true).symmetric);
}

TEST_CASE("PLY with extra vertex properties in any order") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "m.ply",
                      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\n"
                      "property float z\nproperty uchar red\nproperty float x\n"
                      "property float y\nend_header\n9 3 255 1 2\n9 6 0 4 6\n");
  const ObjectModel m = load_model(dir / "m.ply");
  REQUIRE(m.points.size() == 2);
  CHECK(m.points[0] == Vec3(1, 2, 3));
  CHECK(m.points[1] == Vec3(4, 6, 6));
  CHECK(m.diameter == doctest::Approx(std::sqrt(34.0)));
}

TEST_CASE("XYZ collinear points") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "line.xyz", "# three points\n0 0 0\n1 0 0\n\n2 0 0\n");
  const ObjectModel m = load_model(dir / "line.xyz");
  CHECK(m.points.size() == 3);
  CHECK(m.diameter == 2.0);
}

TEST_CASE("load errors are distinct and carry line numbers") {
  pf_test::TempDir dir;
  CHECK(catch_error([&] { load_model(dir / "missing.ply"); }).code == ErrorCode::kMissingFile);

  pf_test::write_text(dir / "empty.ply",
                      "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\n"
                      "property float y\nproperty float z\nend_header\n");
  CHECK(catch_error([&] { load_model(dir / "empty.ply"); }).code == ErrorCode::kZeroVertices);

  pf_test::write_text(dir / "empty.xyz", "# nothing\n");
  CHECK(catch_error([&] { load_model(dir / "empty.xyz"); }).code == ErrorCode::kZeroVertices);

  pf_test::write_text(dir / "binary.ply",
                      "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                      "property float x\nproperty float y\nproperty float z\nend_header\n");
  const Caught bin = catch_error([&] { load_model(dir / "binary.ply"); });
  CHECK(bin.code == ErrorCode::kMalformedHeader);
  CHECK(bin.line == 2u);

  pf_test::write_text(dir / "noz.ply",
                      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                      "property float y\nend_header\n1 2\n");
  CHECK(catch_error([&] { load_model(dir / "noz.ply"); }).code == ErrorCode::kMalformedHeader);

  pf_test::write_text(dir / "noend.ply",
                      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                      "property float y\nproperty float z\n");
  CHECK(catch_error([&] { load_model(dir / "noend.ply"); }).code == ErrorCode::kMalformedHeader);

  pf_test::write_text(dir / "nan.ply",
                      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"
                      "property float y\nproperty float z\nend_header\n0 0 0\n1 abc 2\n");
  const Caught nan = catch_error([&] { load_model(dir / "nan.ply"); });
  CHECK(nan.code == ErrorCode::kNonNumericValue);
  CHECK(nan.line == 9u);

  pf_test::write_text(dir / "short.ply",
                      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                      "property float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n");
  CHECK(catch_error([&] { load_model(dir / "short.ply"); }).code == ErrorCode::kNonNumericValue);

  pf_test::write_text(dir / "bad.xyz", "0 0 0\n1 x 0\n");
  const Caught xyz = catch_error([&] { load_model(dir / "bad.xyz"); });
  CHECK(xyz.code == ErrorCode::kNonNumericValue);
  CHECK(xyz.line == 2u);

  pf_test::write_text(dir / "two.xyz", "0 0\n");
  CHECK(catch_error([&] { load_model(dir / "two.xyz"); }).code == ErrorCode::kNonNumericValue);
}

TEST_CASE("write_ply and write_xyz round trip exactly") {
  pf_test::TempDir dir;
  RngStream rng(1, "roundtrip");
  const ObjectModel m = make_object_model("blob", pf_test::random_points(rng, 50));
  write_ply(dir / "blob.ply", m);
  const ObjectModel back = load_model(dir / "blob.ply");
  CHECK(back.points == m.points);
  write_xyz_points(dir / "blob.xyz", m.points);
  CHECK(read_xyz_points(dir / "blob.xyz") == m.points);
}

TEST_CASE("make_object_model validation") {
  CHECK(catch_error([] { make_object_model("x", {}); }).code == ErrorCode::kZeroVertices);
  CHECK(catch_error([] { make_object_model("x", {Vec3(0, NAN, 0)}); }).code ==
        ErrorCode::kNonFinite);
  CHECK(make_object_model("p", {Vec3(1, 2, 3)}).diameter == 0.0);
}

TEST_CASE("diameter is invariant under rigid transforms") {
  RngStream rng(2, "diam");
  const auto pts = pf_test::random_points(rng, 200);
  const double d = compute_diameter(pts);
  CHECK(d == brute_diameter(pts));
  for (int i = 0; i < 20; ++i) {
    const Pose p = pf_test::random_pose(rng);
    std::vector<Vec3> moved;
    for (const auto& x : pts) moved.push_back(p.apply(x));
    CHECK(std::abs(compute_diameter(moved) - d) <= 1e-9);
  }
}

TEST_CASE("sample_keypoints") {
  const ObjectModel cube = make_object_model("cube", pf_test::unit_cube());
  const KeypointSet two = sample_keypoints(cube, 2);
  REQUIRE(two.size() == 2);
  CHECK((two.positions[0] - two.positions[1]).norm() == doctest::Approx(std::sqrt(3.0)));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(two.positions[i] == cube.points[two.model_indices[i]]);
  }

  const KeypointSet all = sample_keypoints(cube, 8);
  std::set<std::size_t> unique(all.model_indices.begin(), all.model_indices.end());
  CHECK(unique.size() == 8);
  CHECK(sample_keypoints(cube, 8).model_indices == all.model_indices);
  CHECK(sample_keypoints(cube, 8, 99).model_indices == all.model_indices);

  CHECK(catch_error([&] { sample_keypoints(cube, 0); }).code == ErrorCode::kInvalidArgument);
  CHECK(catch_error([&] { sample_keypoints(cube, 9); }).code == ErrorCode::kInvalidArgument);
}

TEST_CASE("keypoint coverage is non-increasing in n") {
  RngStream rng(3, "coverage");
  const ObjectModel m = make_object_model("blob", pf_test::random_points(rng, 300));
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n = 2; n <= 40; ++n) {
    const KeypointSet k = sample_keypoints(m, n);
    double min_pair = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        min_pair = std::min(min_pair, (k.positions[i] - k.positions[j]).norm());
      }
    }
    CHECK(min_pair <= previous);
    previous = min_pair;
  }
}

TEST_CASE("keypoints_from_indices") {
  const ObjectModel cube = make_object_model("cube", pf_test::unit_cube());
  const std::vector<std::size_t> idx = {7, 0};
  const KeypointSet k = keypoints_from_indices(cube, idx);
  CHECK(k.positions[0] == Vec3(1, 1, 1));
  const std::vector<std::size_t> bad = {8};
  CHECK(catch_error([&] { keypoints_from_indices(cube, bad); }).code ==
        ErrorCode::kInvalidArgument);
  const std::vector<std::size_t> dup = {1, 1};
  CHECK(catch_error([&] { keypoints_from_indices(cube, dup); }).code ==
        ErrorCode::kInvalidArgument);
}
