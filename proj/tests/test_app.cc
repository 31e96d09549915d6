#include <doctest.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include "pose_forge/app.h"
#include "pose_forge/metrics.h"
#include "pose_forge/regressor.h"
#include "support.h"

using namespace pose_forge;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = app::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).string()] = pf_test::read_bytes(e.path());
    }
  }
  return files;
}

std::string data_file(const std::string& name) {
  return std::string(POSE_FORGE_TEST_DATA) + "/" + name;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == app::kExitInvalidConfig);
  CHECK(run({"bogus"}).code == app::kExitInvalidConfig);
  CHECK(run({"synth"}).code == app::kExitInvalidConfig);
}

TEST_CASE("config errors name the JSON pointer") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "a.json", R"({"seed": 1, "scenes": {"count": 2, "bogus": 3}})");
  RunResult r = run({"synth", "--config", (dir / "a.json").string()});
  CHECK(r.code == app::kExitInvalidConfig);
  CHECK(r.err.find("/scenes/bogus") != std::string::npos);

  pf_test::write_text(dir / "b.json", R"({"seed": "seven", "scenes": {"count": 2}})");
  r = run({"synth", "--config", (dir / "b.json").string()});
  CHECK(r.code == app::kExitInvalidConfig);
  CHECK(r.err.find("/seed") != std::string::npos);

  pf_test::write_text(dir / "c.json", R"({"scenes": {"count": 2}, "scene_dir": "x"})");
  CHECK(run({"synth", "--config", (dir / "c.json").string()}).code == app::kExitInvalidConfig);

  pf_test::write_text(dir / "d.json", "{not json");
  CHECK(run({"synth", "--config", (dir / "d.json").string()}).code == app::kExitInvalidConfig);

  CHECK(run({"synth", "--config", (dir / "missing.json").string()}).code == app::kExitInvalidConfig);
}

TEST_CASE("occlusion that starves PnP is rejected with exit code 2") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cfg.json",
                      R"({"seed": 1, "scenes": {"count": 2, "n_keypoints": 8,)"
                      R"( "occlusion_rate": 0.5}})");
  const RunResult r = run({"synth", "--config", (dir / "cfg.json").string(), "--out",
                           (dir / "out").string()});
  CHECK(r.code == app::kExitInvalidConfig);
  CHECK(r.err.find("config rejected") != std::string::npos);
}

TEST_CASE("synth writes n scenes and reruns bitwise-identically") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cfg.json",
                      R"({"seed": 7, "scenes": {"count": 10, "pixel_noise_sigma": 1.0,)"
                      R"( "outlier_rate": 0.2, "cloud_noise_sigma": 1.0}})");
  const std::string cfg = (dir / "cfg.json").string();
  REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  int scene_dirs = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) scene_dirs += e.is_directory();
  CHECK(scene_dirs == 10);
  const auto manifest = pf_test::read_bytes(dir / "a" / "manifest.json");
  CHECK(manifest.find("\"count\": 10") != std::string::npos);
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));

  REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "c").string(), "--seed", "8"}).code == 0);
  CHECK(snapshot(dir / "c") != snapshot(dir / "a"));
}

TEST_CASE("train: epochs = 0 writes the initialization, reruns are identical") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cfg.json",
                      R"({"seed": 3, "train": {"epochs": 0, "hidden": 16, "samples": 20,)"
                      R"( "feature_dim": 12}})");
  const std::string cfg = (dir / "cfg.json").string();
  const RunResult r = run({"train", "--config", cfg, "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  const MlpParams loaded = load_checkpoint(dir / "a" / "checkpoint.vfmt");
  const Eigen::VectorXd init = MlpParams::initialize(12, 16, 3).flatten();
  const Eigen::VectorXd got = loaded.flatten();
  REQUIRE(got.size() == init.size());
  for (Eigen::Index i = 0; i < init.size(); ++i) {
    CHECK(got[i] == static_cast<double>(static_cast<float>(init[i])));
  }

  pf_test::write_text(dir / "cfg2.json",
                      R"({"seed": 3, "train": {"epochs": 3, "hidden": 16, "samples": 40,)"
                      R"( "feature_dim": 12}})");
  const std::string cfg2 = (dir / "cfg2.json").string();
  REQUIRE(run({"train", "--config", cfg2, "--out", (dir / "b").string()}).code == 0);
  REQUIRE(run({"train", "--config", cfg2, "--out", (dir / "c").string()}).code == 0);
  CHECK(snapshot(dir / "b") == snapshot(dir / "c"));
  CHECK(pf_test::read_bytes(dir / "b" / "loss_trace.csv").rfind("epoch,loss\n0,", 0) == 0);
}

TEST_CASE("dino pipeline on clean scenes is near exact") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cfg.json",
                      R"({"seed": 11, "pipeline": "dino", "scenes": {"count": 100}})");
  const RunResult r = run({"pipeline", "--config", (dir / "cfg.json").string(), "--out",
                           (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto reports =
      parse_report_csv(pf_test::read_bytes(dir / "out" / "metrics.csv"), "metrics.csv");
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].method_name == "DINOv2 Based");
  CHECK(reports[0].records.size() == 100);
  const auto mean = reports[0].aggregate();
  CHECK(mean.rot_err_deg < 0.1);
  CHECK(mean.trans_err_mm < 0.1);
  CHECK(r.out == pf_test::read_bytes(dir / "out" / "report.txt"));
}

TEST_CASE("pipeline isolates corrupt scenes and is deterministic") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "synth.json", R"({"seed": 5, "scenes": {"count": 4}})");
  REQUIRE(run({"synth", "--config", (dir / "synth.json").string(), "--out",
               (dir / "scenes").string()})
              .code == 0);
  pf_test::write_text(dir / "scenes" / "scene_0002" / "correspondences.csv", "garbage\n");
  pf_test::write_text(dir / "run.json", R"({"pipeline": "dino", "scene_dir": "scenes"})");
  const std::string cfg = (dir / "run.json").string();
  const RunResult a = run({"pipeline", "--config", cfg, "--out", (dir / "a").string()});
  CHECK(a.code == 0);
  CHECK(a.out.find("failed scene_0002") != std::string::npos);
  const auto reports =
      parse_report_csv(pf_test::read_bytes(dir / "a" / "metrics.csv"), "metrics.csv");
  CHECK(reports[0].records.size() == 3);
  REQUIRE(run({"pipeline", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));

  for (int i = 0; i < 4; ++i) {
    pf_test::write_text(dir / "scenes" / ("scene_000" + std::to_string(i)) / "cloud.xyz", "x\n");
  }
  CHECK(run({"pipeline", "--config", cfg, "--out", (dir / "c").string()}).code ==
        app::kExitFailure);
}

TEST_CASE("report command") {
  const RunResult golden = run({"report", "--inject-reference", data_file("table1_reference.csv")});
  CHECK(golden.code == 0);
  CHECK(golden.out == pf_test::read_bytes(data_file("table1_golden.txt")));

  pf_test::TempDir dir;
  pf_test::write_text(dir / "a.csv", std::string(kReportCsvHeader) + "\nA,s0,1,1,1,1\n");
  pf_test::write_text(dir / "b.csv", std::string(kReportCsvHeader) + "\nB,s0,2,2,2,2\n");
  const RunResult two = run({"report", (dir / "a.csv").string(), (dir / "b.csv").string(),
                             "--out", (dir / "out").string()});
  CHECK(two.code == 0);
  CHECK(two.out.rfind("Metric                       A       B\n", 0) == 0);
  CHECK(pf_test::read_bytes(dir / "out" / "report.txt") == two.out);

  pf_test::write_text(dir / "empty.csv", "");
  const RunResult empty = run({"report", (dir / "empty.csv").string()});
  CHECK(empty.code == app::kExitFailure);
  CHECK(empty.err.find("empty.csv") != std::string::npos);

  pf_test::write_text(dir / "bad.csv", std::string(kReportCsvHeader) + "\nA,s0,1,x,1,1\n");
  const RunResult bad = run({"report", (dir / "bad.csv").string()});
  CHECK(bad.code == app::kExitFailure);
  CHECK(bad.err.find("bad.csv") != std::string::npos);
  CHECK(bad.err.find("2") != std::string::npos);

  CHECK(run({"report"}).code == app::kExitFailure);
}

TEST_CASE("outputs do not depend on the worker count") {
  pf_test::TempDir dir;
  pf_test::write_text(dir / "cfg.json",
                      R"({"seed": 21, "pipeline": "dino", "scenes": {"count": 12,)"
                      R"( "pixel_noise_sigma": 1.0, "outlier_rate": 0.25}})");
  const std::string cfg = (dir / "cfg.json").string();
  ::setenv("POSE_FORGE_THREADS", "1", 1);
  const RunResult serial = run({"pipeline", "--config", cfg, "--out", (dir / "a").string()});
  ::setenv("POSE_FORGE_THREADS", "4", 1);
  const RunResult parallel = run({"pipeline", "--config", cfg, "--out", (dir / "b").string()});
  ::unsetenv("POSE_FORGE_THREADS");
  CHECK(serial.code == 0);
  CHECK(serial.out == parallel.out);
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));
}
