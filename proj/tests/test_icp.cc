#include <doctest.h>

#include <cmath>

#include "pose_forge/error.h"
#include "pose_forge/icp.h"
#include "pose_forge/metrics.h"
#include "pose_forge/synth.h"
#include "support.h"

using namespace pose_forge;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

std::vector<Vec3> transformed(const std::vector<Vec3>& pts, const Pose& p) {
  std::vector<Vec3> out;
  for (const auto& x : pts) out.push_back(p.apply(x));
  return out;
}

double paired_cost(const Pose& p, const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) s += (p.apply(src[i]) - dst[i]).squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("kabsch_align examples") {
  RngStream rng(1, "kabsch");
  const auto src = pf_test::random_points(rng, 50);
  const Pose id = kabsch_align(src, src);
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(id.translation.norm() <= 1e-9);

  for (int i = 0; i < 50; ++i) {
    const Pose gt = pf_test::random_pose(rng);
    const Pose est = kabsch_align(src, transformed(src, gt));
    CHECK((est.rotation - gt.rotation).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((est.translation - gt.translation).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("kabsch_align errors") {
  const std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK(code_of([&] { kabsch_align(two, two); }) == ErrorCode::kTooFewPoints);
  const std::vector<Vec3> three = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  CHECK(code_of([&] { kabsch_align(three, three); }) == ErrorCode::kCollinearDegenerate);
  CHECK(code_of([&] { kabsch_align(three, two); }) == ErrorCode::kSizeMismatch);
}

TEST_CASE("kabsch optimality against random perturbations") {
  RngStream rng(2, "kabsch-opt");
  const auto src = pf_test::random_points(rng, 40);
  auto dst = transformed(src, pf_test::random_pose(rng));
  for (auto& p : dst) p += Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  const Pose best = kabsch_align(src, dst);
  const double cost = paired_cost(best, src, dst);
  for (int i = 0; i < 100; ++i) {
    RngStream prng(3, "kabsch-perturb", static_cast<std::uint64_t>(i));
    const Pose other = perturb_pose(best, rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0), prng);
    CHECK(paired_cost(other, src, dst) >= cost);
  }
}

TEST_CASE("kabsch rigid invariance") {
  RngStream rng(4, "kabsch-inv");
  const auto src = pf_test::random_points(rng, 30);
  auto dst = transformed(src, pf_test::random_pose(rng));
  for (auto& p : dst) p += 0.5 * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  const Pose t = kabsch_align(src, dst);
  const Pose g = pf_test::random_pose(rng);
  const Pose tg = kabsch_align(transformed(src, g), transformed(dst, g));
  // Expected: g * t * g^-1.
  const Pose expected = compose(compose(g, t), invert(g));
  CHECK((tg.rotation - expected.rotation).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((tg.translation - expected.translation).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("icp fixed point") {
  const ObjectModel m = make_driller_model(600);
  RngStream rng(5, "icp-fixed");
  const Pose gt = pf_test::random_pose(rng);
  const IcpResult r = icp_refine(m, transformed(m.points, gt), gt);
  CHECK(r.final_rmse_mm <= 1e-9);
  CHECK(rotation_geodesic_deg(r.pose.rotation, gt.rotation) <= 1e-6);
  CHECK(translation_error_mm(r.pose.translation, gt.translation) <= 1e-6);
}

TEST_CASE("icp recovers perturbed poses with monotone RMSE") {
  const ObjectModel m = make_driller_model(800);
  for (int trial = 0; trial < 10; ++trial) {
    RngStream rng(6, "icp-perturbed", static_cast<std::uint64_t>(trial));
    const Pose gt = sample_pose(rng, default_camera(), 800, 1200);
    const Pose init = perturb_pose(gt, 10.0, 20.0, rng);
    const IcpResult r = icp_refine(m, transformed(m.points, gt), init);
    CHECK(rotation_geodesic_deg(r.pose.rotation, gt.rotation) < 0.1);
    CHECK(translation_error_mm(r.pose.translation, gt.translation) < 0.5);
    CHECK(add_metric(m, r.pose, gt) <= 0.1 * add_metric(m, init, gt));
    REQUIRE(r.rmse_trace.size() >= 2);
    for (std::size_t i = 1; i < r.rmse_trace.size(); ++i) {
      CHECK(r.rmse_trace[i] <= r.rmse_trace[i - 1]);
    }
    CHECK(r.final_rmse_mm == r.rmse_trace.back());
  }
}

TEST_CASE("icp gating failure and input errors") {
  const ObjectModel m = make_driller_model(300);
  const auto far = transformed(m.points, Pose{Mat3::Identity(), Vec3(0, 0, 5000)});
  CHECK(code_of([&] { icp_refine(m, far, Pose::identity()); }) == ErrorCode::kGatingFailure);
  CHECK(code_of([&] { icp_refine(m, {}, Pose::identity()); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { IcpConfig{0}.validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { IcpConfig{10, 1e-6, 0.0}.validate(); }) == ErrorCode::kInvalidArgument);
}
