#include <doctest.h>

#include <cmath>
#include <fstream>

#include "pose_forge/error.h"
#include "pose_forge/metrics.h"
#include "pose_forge/synth.h"
#include "support.h"

using namespace pose_forge;

namespace {

ObjectModel unit_square() {
  return make_object_model("square", {Vec3(1, 1, 0), Vec3(-1, 1, 0), Vec3(-1, -1, 0),
                                      Vec3(1, -1, 0)},
                           true);
}

Report report_of(std::string name, std::vector<double> adds) {
  Report r;
  r.method_name = std::move(name);
  for (std::size_t i = 0; i < adds.size(); ++i) {
    r.records.push_back({"s" + std::to_string(i), adds[i], adds[i], 0.0, 0.0});
  }
  return r;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("ADD examples") {
  RngStream rng(1, "add");
  const ObjectModel m = make_object_model("blob", pf_test::random_points(rng, 100));
  const Pose gt = pf_test::random_pose(rng);
  CHECK(add_metric(m, gt, gt) == 0.0);
  Pose shifted = gt;
  shifted.translation += Vec3(3, 0, 0);
  CHECK(add_metric(m, shifted, gt) == doctest::Approx(3.0).epsilon(1e-15));

  // Hand evaluation: every vertex of the square moves along a chord of
  // length 2 under a quarter turn.
  const ObjectModel sq = unit_square();
  const Pose rz{pf_test::rot_z_deg(90), Vec3::Zero()};
  CHECK(add_metric(sq, rz, Pose::identity()) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("ADD-S examples") {
  const ObjectModel sq = unit_square();
  const Pose rz{pf_test::rot_z_deg(90), Vec3::Zero()};
  CHECK(adds_metric(sq, Pose::identity(), Pose::identity()) == 0.0);
  CHECK(adds_metric(sq, rz, Pose::identity()) <= 1e-15);
  CHECK(add_metric(sq, rz, Pose::identity()) > 0.0);
}

TEST_CASE("ADD and ADD-S agree with brute-force oracles") {
  RngStream rng(2, "oracle");
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = pf_test::random_points(rng, 5 + rng.uniform_index(60));
    const ObjectModel m = make_object_model("r", pts);
    const Pose pred = pf_test::random_pose(rng);
    const Pose gt = pf_test::random_pose(rng);
    const double add = add_metric(m, pred, gt);
    const double adds = adds_metric(m, pred, gt);
    CHECK(add == doctest::Approx(pf_test::oracle_add(pts, pred, gt)).epsilon(1e-12));
    CHECK(adds == doctest::Approx(pf_test::oracle_adds(pts, pred, gt)).epsilon(1e-12));
    CHECK(adds <= add);
  }
}

TEST_CASE("ADD is invariant to a shared world-frame change") {
  RngStream rng(3, "world");
  const ObjectModel m = make_object_model("r", pf_test::random_points(rng, 80));
  for (int i = 0; i < 100; ++i) {
    const Pose pred = pf_test::random_pose(rng);
    const Pose gt = pf_test::random_pose(rng);
    const Pose w = pf_test::random_pose(rng);
    CHECK(std::abs(add_metric(m, compose(w, pred), compose(w, gt)) - add_metric(m, pred, gt)) <=
          1e-9);
  }
}

TEST_CASE("ADD under pure translation equals the offset norm") {
  RngStream rng(4, "translation");
  const ObjectModel m = make_object_model("r", pf_test::random_points(rng, 50));
  for (int i = 0; i < 100; ++i) {
    const Pose gt = pf_test::random_pose(rng);
    const Vec3 d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const Pose pred{gt.rotation, gt.translation + d};
    CHECK(std::abs(add_metric(m, pred, gt) - d.norm()) <= 1e-12);
  }
}

TEST_CASE("evaluate_scene") {
  const ObjectModel driller = make_driller_model();
  RngStream rng(5, "eval");
  const Pose gt = pf_test::random_pose(rng);
  const EvalRecord zero = evaluate_scene(driller, gt, gt, "a");
  CHECK(zero.add_mm == 0.0);
  CHECK(zero.adds_mm == 0.0);
  CHECK(zero.rot_err_deg == 0.0);
  CHECK(zero.trans_err_mm == 0.0);
  CHECK(zero.scene_id == "a");

  const Pose pred{gt.rotation, gt.translation + Vec3(0, 0, 20)};
  const EvalRecord r = evaluate_scene(driller, pred, gt);
  CHECK(r.add_mm == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(r.adds_mm <= 20.0 + 1e-12);
  CHECK(r.rot_err_deg == 0.0);
  CHECK(r.trans_err_mm == doctest::Approx(20.0).epsilon(1e-15));
}

TEST_CASE("aggregate is the unweighted mean") {
  const Report r = report_of("m", {10.0, 20.0});
  CHECK(r.aggregate().add_mm == 15.0);
  const std::vector<Report> rs = {r};
  CHECK(render_report(rs).find("15.00") != std::string::npos);
}

TEST_CASE("single zero scene renders an all-zero column") {
  const std::vector<Report> rs = {report_of("Zero", {0.0})};
  const std::string expected =
      "Metric                    Zero\n"
      "ADD Distance (mm)         0.00\n"
      "ADD-S Distance (mm)       0.00\n"
      "Rotation Error (°)        0.00\n"
      "Translation Error (mm)    0.00\n";
  CHECK(render_report(rs) == expected);
}

TEST_CASE("published values render as the reference table") {
  std::ifstream in(std::string(POSE_FORGE_TEST_DATA) + "/table1_reference.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  auto reports = parse_report_csv(ss.str(), "table1_reference.csv");
  REQUIRE(reports.size() == 2);
  for (auto& r : reports) r.reference = true;
  CHECK(reports[0].method_name == "CLIP Based");
  CHECK(reports[0].aggregate().add_mm == 32.17);
  CHECK(reports[0].aggregate().adds_mm == 32.17);
  CHECK(reports[0].aggregate().rot_err_deg == 11.68);
  CHECK(reports[0].aggregate().trans_err_mm == 20.00);
  CHECK(reports[1].aggregate().add_mm == 28.45);
  CHECK(reports[1].aggregate().adds_mm == 29.12);
  CHECK(reports[1].aggregate().rot_err_deg == 9.34);
  CHECK(reports[1].aggregate().trans_err_mm == 17.52);
  CHECK(render_report(reports) ==
        pf_test::read_bytes(std::string(POSE_FORGE_TEST_DATA) + "/table1_golden.txt"));
}

TEST_CASE("methods without records print n/a and failures are listed") {
  Report r = report_of("Broken", {});
  r.failures.push_back({"scene_0003", "consensus-failure: no"});
  const std::vector<Report> rs = {r};
  const std::string text = render_report(rs);
  CHECK(text.find("n/a") != std::string::npos);
  CHECK(text.find("Broken: 0 scene(s) evaluated, 1 failed\n  failed scene_0003: consensus-failure: no\n") !=
        std::string::npos);
}

TEST_CASE("CSV round trip") {
  const std::vector<Report> rs = {report_of("A", {1.5, 2.25}), report_of("B", {3.0})};
  const std::string csv = render_csv(rs);
  CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("A,s0,1.500000,1.500000,0.000000,0.000000\n") != std::string::npos);
  const auto back = parse_report_csv(csv, "mem");
  REQUIRE(back.size() == 2);
  CHECK(back[0].method_name == "A");
  CHECK(back[0].records.size() == 2);
  CHECK(back[1].records[0].add_mm == 3.0);
}

TEST_CASE("CSV parse errors name the line") {
  CHECK(code_of([] { parse_report_csv("", "x.csv"); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { parse_report_csv(std::string(kReportCsvHeader) + "\n", "x.csv"); }) ==
        ErrorCode::kEmptyInput);
  try {
    parse_report_csv(std::string(kReportCsvHeader) + "\nA,s,1,2,x,4\n", "bad.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonNumericValue);
    CHECK(e.line() == 2u);
    CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
  }
  CHECK(code_of([] { parse_report_csv("method,scene\nA,s\n", "x.csv"); }) ==
        ErrorCode::kMalformedHeader);
}
