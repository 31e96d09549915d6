#include "pose_forge/app.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "pose_forge/error.h"
#include "pose_forge/feature_match.h"
#include "pose_forge/icp.h"
#include "pose_forge/metrics.h"
#include "pose_forge/object_model.h"
#include "pose_forge/parallel.h"
#include "pose_forge/pnp.h"
#include "pose_forge/regressor.h"
#include "pose_forge/synth.h"

namespace pose_forge::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema

enum class PipelineKind { kDino, kClip, kHybrid };
enum class CoarseSource { kRegressor, kPerturbedGt };

struct SceneSource {
  std::size_t count = 10;
  SceneConfig scene;  // seed is replaced per scene
};

struct RunConfig {
  fs::path base_dir;
  std::uint64_t seed = 0;
  PipelineKind pipeline = PipelineKind::kDino;
  fs::path output_dir = "out";
  std::optional<fs::path> model_path;
  bool model_symmetric = false;
  std::optional<SceneSource> scenes;
  std::optional<fs::path> scene_dir;
  double min_score = 0.3;
  RansacConfig ransac{.inlier_threshold_px = 6.0};
  IcpConfig icp;
  TrainConfig train;
  std::size_t train_samples = 500;
  std::size_t train_feature_dim = 32;
  double train_feature_noise = 0.01;
  std::optional<fs::path> checkpoint;
  CoarseSource coarse = CoarseSource::kRegressor;
  double perturb_rot_deg = 10.0;
  double perturb_trans_mm = 20.0;
};

[[noreturn]] void config_error(const std::string& pointer, const std::string& message) {
  throw Error(ErrorCode::kInvalidConfig,
              fmt::format("invalid config at {}: {}", pointer.empty() ? "/" : pointer, message));
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (const char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Typed view of one JSON object that remembers its pointer and rejects keys
// nobody asked about.
class Section {
 public:
  Section(const json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
    if (!j_.is_object()) config_error(pointer_, "expected an object");
  }

  std::string at(const std::string& key) const { return pointer_ + "/" + escape_pointer(key); }
  bool has(const std::string& key) {
    seen_.push_back(key);
    return j_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) config_error(at(key), "expected a number");
    return v.get<double>();
  }
  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) config_error(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) config_error(at(key), "expected true or false");
    return v.get<bool>();
  }
  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    if (!v.is_string()) config_error(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::optional<Section> object(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return Section(j_.at(key), at(key));
  }
  const json& raw(const std::string& key) const { return j_.at(key); }

  void reject_unknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        config_error(at(key), "unknown key");
      }
    }
  }

 private:
  const json& j_;
  std::string pointer_;
  std::vector<std::string> seen_;
};

void require(bool ok, const std::string& pointer, const std::string& message) {
  if (!ok) config_error(pointer, message);
}

CameraIntrinsics parse_camera(Section s) {
  CameraIntrinsics k = default_camera();
  k.fx = s.number("fx", k.fx);
  k.fy = s.number("fy", k.fy);
  k.cx = s.number("cx", k.cx);
  k.cy = s.number("cy", k.cy);
  k.width = static_cast<int>(s.unsigned_int("width", static_cast<std::uint64_t>(k.width)));
  k.height = static_cast<int>(s.unsigned_int("height", static_cast<std::uint64_t>(k.height)));
  s.reject_unknown();
  try {
    k.validate();
  } catch (const Error& e) {
    config_error(s.at(""), e.what());
  }
  return k;
}

SceneSource parse_scenes(Section s) {
  SceneSource src;
  SceneConfig& c = src.scene;
  src.count = s.unsigned_int("count", src.count);
  require(src.count >= 1, s.at("count"), "must be >= 1");
  c.n_keypoints = s.unsigned_int("n_keypoints", c.n_keypoints);
  c.pixel_noise_sigma = s.number("pixel_noise_sigma", c.pixel_noise_sigma);
  require(c.pixel_noise_sigma >= 0, s.at("pixel_noise_sigma"), "must be >= 0");
  c.outlier_rate = s.number("outlier_rate", c.outlier_rate);
  require(c.outlier_rate >= 0 && c.outlier_rate < 1, s.at("outlier_rate"), "must be in [0, 1)");
  c.occlusion_rate = s.number("occlusion_rate", c.occlusion_rate);
  require(c.occlusion_rate >= 0 && c.occlusion_rate < 1, s.at("occlusion_rate"),
          "must be in [0, 1)");
  if (s.has("depth_range_mm")) {
    const auto& d = s.raw("depth_range_mm");
    if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number()) {
      config_error(s.at("depth_range_mm"), "expected [min, max]");
    }
    c.depth_min_mm = d[0].get<double>();
    c.depth_max_mm = d[1].get<double>();
    require(c.depth_min_mm > 0 && c.depth_max_mm >= c.depth_min_mm, s.at("depth_range_mm"),
            "need 0 < min <= max");
  }
  c.cloud_noise_sigma = s.number("cloud_noise_sigma", c.cloud_noise_sigma);
  require(c.cloud_noise_sigma >= 0, s.at("cloud_noise_sigma"), "must be >= 0");
  c.feature_stride_px = s.number("feature_stride_px", c.feature_stride_px);
  require(c.feature_stride_px > 0, s.at("feature_stride_px"), "must be > 0");
  c.feature_dim = s.unsigned_int("feature_dim", c.feature_dim);
  require(c.feature_dim >= 1, s.at("feature_dim"), "must be >= 1");
  c.descriptor_noise = s.number("descriptor_noise", c.descriptor_noise);
  require(c.descriptor_noise >= 0, s.at("descriptor_noise"), "must be >= 0");
  c.clip_feature_dim = s.unsigned_int("clip_feature_dim", c.clip_feature_dim);
  require(c.clip_feature_dim >= 7, s.at("clip_feature_dim"), "must be >= 7");
  c.clip_feature_noise = s.number("clip_feature_noise", c.clip_feature_noise);
  require(c.clip_feature_noise >= 0, s.at("clip_feature_noise"), "must be >= 0");
  if (auto cam = s.object("camera")) c.camera = parse_camera(std::move(*cam));
  s.reject_unknown();
  if (c.visible_keypoints() < kPnpMinimalSample) {
    throw Error(ErrorCode::kConfigRejected,
                fmt::format("config rejected at {}: {} keypoints with occlusion_rate {} leave {} "
                            "visible, PnP needs {}",
                            s.at("occlusion_rate"), c.n_keypoints, c.occlusion_rate,
                            c.visible_keypoints(), kPnpMinimalSample));
  }
  return src;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("cannot open config '{}'", path.string()));
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }

  RunConfig cfg;
  cfg.base_dir = path.parent_path();
  Section root(j, "");
  cfg.seed = root.unsigned_int("seed", cfg.seed);
  if (auto p = root.string("pipeline")) {
    if (*p == "dino") cfg.pipeline = PipelineKind::kDino;
    else if (*p == "clip") cfg.pipeline = PipelineKind::kClip;
    else if (*p == "hybrid") cfg.pipeline = PipelineKind::kHybrid;
    else config_error(root.at("pipeline"), "expected \"dino\", \"clip\" or \"hybrid\"");
  }
  if (auto o = root.string("output_dir")) cfg.output_dir = resolve(cfg.base_dir, *o);
  else cfg.output_dir = cfg.base_dir / "out";

  if (auto m = root.object("model")) {
    if (auto p = m->string("path")) cfg.model_path = resolve(cfg.base_dir, *p);
    cfg.model_symmetric = m->boolean("symmetric", false);
    m->reject_unknown();
  }
  if (auto s = root.object("scenes")) cfg.scenes = parse_scenes(std::move(*s));
  if (auto d = root.string("scene_dir")) cfg.scene_dir = resolve(cfg.base_dir, *d);
  if (cfg.scenes && cfg.scene_dir) {
    config_error(root.at("scene_dir"), "give either \"scenes\" or \"scene_dir\", not both");
  }

  if (auto m = root.object("match")) {
    cfg.min_score = m->number("min_score", cfg.min_score);
    require(cfg.min_score >= -1 && cfg.min_score <= 1, m->at("min_score"), "must be in [-1, 1]");
    m->reject_unknown();
  }
  if (auto r = root.object("ransac")) {
    cfg.ransac.inlier_threshold_px = r->number("inlier_threshold_px", cfg.ransac.inlier_threshold_px);
    require(cfg.ransac.inlier_threshold_px > 0, r->at("inlier_threshold_px"), "must be > 0");
    cfg.ransac.max_iterations =
        static_cast<int>(r->unsigned_int("max_iterations", static_cast<std::uint64_t>(cfg.ransac.max_iterations)));
    require(cfg.ransac.max_iterations >= 1, r->at("max_iterations"), "must be >= 1");
    cfg.ransac.confidence = r->number("confidence", cfg.ransac.confidence);
    require(cfg.ransac.confidence > 0 && cfg.ransac.confidence < 1, r->at("confidence"),
            "must be in (0, 1)");
    r->reject_unknown();
  }
  if (auto i = root.object("icp")) {
    cfg.icp.max_iterations =
        static_cast<int>(i->unsigned_int("max_iterations", static_cast<std::uint64_t>(cfg.icp.max_iterations)));
    require(cfg.icp.max_iterations >= 1, i->at("max_iterations"), "must be >= 1");
    cfg.icp.convergence_tol = i->number("convergence_tol", cfg.icp.convergence_tol);
    require(cfg.icp.convergence_tol >= 0, i->at("convergence_tol"), "must be >= 0");
    cfg.icp.max_corr_dist_mm = i->number("max_corr_dist_mm", cfg.icp.max_corr_dist_mm);
    require(cfg.icp.max_corr_dist_mm > 0, i->at("max_corr_dist_mm"), "must be > 0");
    i->reject_unknown();
  }
  if (auto t = root.object("train")) {
    TrainConfig& tc = cfg.train;
    tc.epochs = static_cast<int>(t->unsigned_int("epochs", static_cast<std::uint64_t>(tc.epochs)));
    tc.learning_rate = t->number("learning_rate", tc.learning_rate);
    require(tc.learning_rate >= 0, t->at("learning_rate"), "must be >= 0");
    tc.weight_decay = t->number("weight_decay", tc.weight_decay);
    require(tc.weight_decay >= 0, t->at("weight_decay"), "must be >= 0");
    tc.batch_size = t->unsigned_int("batch_size", tc.batch_size);
    require(tc.batch_size >= 1, t->at("batch_size"), "must be >= 1");
    tc.translation_weight = t->number("translation_weight", tc.translation_weight);
    require(tc.translation_weight > 0, t->at("translation_weight"), "must be > 0");
    tc.hidden = t->unsigned_int("hidden", tc.hidden);
    require(tc.hidden >= 1, t->at("hidden"), "must be >= 1");
    cfg.train_samples = t->unsigned_int("samples", cfg.train_samples);
    require(cfg.train_samples >= 1, t->at("samples"), "must be >= 1");
    cfg.train_feature_dim = t->unsigned_int("feature_dim", cfg.train_feature_dim);
    require(cfg.train_feature_dim >= 7, t->at("feature_dim"), "must be >= 7");
    cfg.train_feature_noise = t->number("feature_noise", cfg.train_feature_noise);
    require(cfg.train_feature_noise >= 0, t->at("feature_noise"), "must be >= 0");
    t->reject_unknown();
  }
  if (auto c = root.string("checkpoint")) cfg.checkpoint = resolve(cfg.base_dir, *c);
  if (auto h = root.object("hybrid")) {
    if (auto c = h->string("coarse")) {
      if (*c == "regressor") cfg.coarse = CoarseSource::kRegressor;
      else if (*c == "perturbed-gt") cfg.coarse = CoarseSource::kPerturbedGt;
      else config_error(h->at("coarse"), "expected \"regressor\" or \"perturbed-gt\"");
    }
    cfg.perturb_rot_deg = h->number("perturb_rot_deg", cfg.perturb_rot_deg);
    require(cfg.perturb_rot_deg >= 0, h->at("perturb_rot_deg"), "must be >= 0");
    cfg.perturb_trans_mm = h->number("perturb_trans_mm", cfg.perturb_trans_mm);
    require(cfg.perturb_trans_mm >= 0, h->at("perturb_trans_mm"), "must be >= 0");
    h->reject_unknown();
  }
  root.reject_unknown();
  return cfg;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::string scene_id(std::size_t i) { return fmt::format("scene_{:04d}", i); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing '{}'", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ObjectModel load_configured_model(const RunConfig& cfg) {
  if (cfg.model_path) return load_model(*cfg.model_path, cfg.model_symmetric);
  if (cfg.scene_dir && fs::exists(*cfg.scene_dir / "model.ply")) {
    return load_model(*cfg.scene_dir / "model.ply", cfg.model_symmetric);
  }
  ObjectModel m = make_driller_model();
  m.symmetric = cfg.model_symmetric;
  return m;
}

SceneConfig scene_config_for(const RunConfig& cfg, std::size_t i) {
  SceneConfig c = cfg.scenes->scene;
  c.seed = derive_seed(cfg.seed, "scene", i);
  c.embedding_seed = cfg.seed;
  return c;
}

struct LoadedScene {
  std::string id;
  std::optional<Scene> scene;
  std::string error;  // set when the scene could not be produced
};

std::vector<LoadedScene> load_scenes(const RunConfig& cfg, const ObjectModel& model) {
  std::vector<LoadedScene> out;
  if (cfg.scenes) {
    out.resize(cfg.scenes->count);
    parallel_for(out.size(), [&](std::size_t i) {
      out[i].id = scene_id(i);
      try {
        out[i].scene = generate_scene(model, scene_config_for(cfg, i));
      } catch (const Error& e) {
        out[i].error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
      }
    });
    return out;
  }
  if (!cfg.scene_dir) {
    throw Error(ErrorCode::kInvalidConfig,
                "invalid config at /: need \"scenes\" or \"scene_dir\" as the scene source");
  }
  json manifest;
  try {
    manifest = json::parse(read_file(*cfg.scene_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("bad manifest.json: {}", e.what()));
  }
  std::vector<std::string> ids;
  try {
    for (const auto& s : manifest.at("scenes")) ids.push_back(s.at("id").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("bad manifest.json: {}", e.what()));
  }
  out.resize(ids.size());
  parallel_for(out.size(), [&](std::size_t i) {
    out[i].id = ids[i];
    try {
      out[i].scene = read_scene(*cfg.scene_dir / ids[i]);
    } catch (const Error& e) {
      out[i].error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
    }
  });
  return out;
}

std::vector<Report> read_reference(const fs::path& path) {
  auto reports = parse_report_csv(read_file(path), path.string());
  for (auto& r : reports) r.reference = true;
  return reports;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.scenes) {
    throw Error(ErrorCode::kInvalidConfig, "invalid config at /scenes: synth needs a \"scenes\" block");
  }
  const ObjectModel model = load_configured_model(cfg);
  ensure_dir(cfg.output_dir);
  write_ply(cfg.output_dir / "model.ply", model);

  const std::size_t n = cfg.scenes->count;
  std::vector<std::vector<std::string>> files(n);
  parallel_for(n, [&](std::size_t i) {
    const Scene scene = generate_scene(model, scene_config_for(cfg, i));
    files[i] = write_scene(cfg.output_dir / scene_id(i), scene);
  });

  nlohmann::ordered_json manifest;
  manifest["seed"] = cfg.seed;
  manifest["count"] = n;
  manifest["model"] = "model.ply";
  manifest["scenes"] = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::ordered_json s;
    s["id"] = scene_id(i);
    s["seed"] = derive_seed(cfg.seed, "scene", i);
    s["files"] = files[i];
    manifest["scenes"].push_back(std::move(s));
  }
  write_file(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  out << fmt::format("wrote {} scene(s) to {}\n", n, cfg.output_dir.string());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const auto dataset = generate_regression_dataset(cfg.seed, cfg.train_samples,
                                                   cfg.train_feature_dim, cfg.train_feature_noise);
  const TrainResult result = train(tc, dataset);
  ensure_dir(cfg.output_dir);
  save_checkpoint(cfg.output_dir / "checkpoint.vfmt", result.params);
  std::string trace = "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
    trace += fmt::format("{},{:.17g}\n", e, result.loss_trace[e]);
  }
  write_file(cfg.output_dir / "loss_trace.csv", trace);
  out << fmt::format("epoch 0 loss {:.6f}, epoch {} loss {:.6f} ({:.2f}% of initial)\n",
                     result.loss_trace.front(), result.loss_trace.size() - 1,
                     result.loss_trace.back(),
                     100.0 * result.loss_trace.back() / result.loss_trace.front());
  return kExitOk;
}

struct SceneOutcome {
  std::optional<EvalRecord> record;
  std::optional<EvalRecord> coarse_record;  // hybrid only
  std::string failure;
  std::string coarse_failure;
};

std::string describe(const Error& e) {
  return fmt::format("{}: {}", error_code_name(e.code()), e.what());
}

int cmd_pipeline(const RunConfig& cfg, const std::optional<fs::path>& reference,
                 std::ostream& out) {
  const ObjectModel model = load_configured_model(cfg);
  std::optional<MlpParams> params;
  const bool needs_regressor =
      cfg.pipeline == PipelineKind::kClip ||
      (cfg.pipeline == PipelineKind::kHybrid && cfg.coarse == CoarseSource::kRegressor);
  if (needs_regressor) {
    if (!cfg.checkpoint) {
      throw Error(ErrorCode::kInvalidConfig,
                  "invalid config at /checkpoint: this pipeline needs a trained checkpoint");
    }
    params = load_checkpoint(*cfg.checkpoint);
  }
  // Load the reference first so a bad file fails before any work.
  std::vector<Report> references;
  if (reference) references = read_reference(*reference);

  const auto scenes = load_scenes(cfg, model);
  std::vector<SceneOutcome> outcomes(scenes.size());

  parallel_for(scenes.size(), [&](std::size_t i) {
    const LoadedScene& ls = scenes[i];
    SceneOutcome& o = outcomes[i];
    if (!ls.scene) {
      o.failure = o.coarse_failure = ls.error;
      return;
    }
    const Scene& s = *ls.scene;
    try {
      switch (cfg.pipeline) {
        case PipelineKind::kDino: {
          const auto detections = match_keypoints(s.feature_map, s.templates, cfg.min_score);
          const auto corrs = build_correspondences(detections, s.keypoints);
          RansacConfig rc = cfg.ransac;
          rc.seed = derive_seed(cfg.seed, "pipeline-ransac", i);
          const PnpResult pnp = pnp_ransac(corrs, s.camera, rc);
          const IcpResult icp = icp_refine(model, s.observed_cloud, pnp.pose, cfg.icp);
          o.record = evaluate_scene(model, icp.pose, s.gt_pose, ls.id);
          break;
        }
        case PipelineKind::kClip: {
          const Pose pose = prediction_to_pose(forward(*params, s.visual, s.semantic));
          o.record = evaluate_scene(model, pose, s.gt_pose, ls.id);
          break;
        }
        case PipelineKind::kHybrid: {
          Pose coarse;
          if (cfg.coarse == CoarseSource::kRegressor) {
            coarse = prediction_to_pose(forward(*params, s.visual, s.semantic));
          } else {
            RngStream rng(cfg.seed, "hybrid-perturb", i);
            coarse = perturb_pose(s.gt_pose, cfg.perturb_rot_deg, cfg.perturb_trans_mm, rng,
                                  centroid(model.points));
          }
          o.coarse_record = evaluate_scene(model, coarse, s.gt_pose, ls.id);
          const IcpResult icp = icp_refine(model, s.observed_cloud, coarse, cfg.icp);
          o.record = evaluate_scene(model, icp.pose, s.gt_pose, ls.id);
          break;
        }
      }
    } catch (const Error& e) {
      o.failure = describe(e);
      if (!o.coarse_record) o.coarse_failure = o.failure;
    } catch (const std::exception& e) {
      o.failure = fmt::format("internal: {}", e.what());
      if (!o.coarse_record) o.coarse_failure = o.failure;
    }
  });

  std::vector<Report> reports;
  if (cfg.pipeline == PipelineKind::kHybrid) {
    Report coarse{"Hybrid coarse", {}, {}, false};
    Report refined{"Hybrid refined", {}, {}, false};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].coarse_record) coarse.records.push_back(*outcomes[i].coarse_record);
      else coarse.failures.push_back({scenes[i].id, outcomes[i].coarse_failure});
      if (outcomes[i].record) refined.records.push_back(*outcomes[i].record);
      else refined.failures.push_back({scenes[i].id, outcomes[i].failure});
    }
    reports.push_back(std::move(coarse));
    reports.push_back(std::move(refined));
  } else {
    Report r{cfg.pipeline == PipelineKind::kDino ? "DINOv2 Based" : "CLIP Based", {}, {}, false};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].record) r.records.push_back(*outcomes[i].record);
      else r.failures.push_back({scenes[i].id, outcomes[i].failure});
    }
    reports.push_back(std::move(r));
  }
  const Report& measured = reports.back();
  const bool any_success = !measured.records.empty();

  ensure_dir(cfg.output_dir);
  write_file(cfg.output_dir / "metrics.csv", render_csv(reports));
  for (auto& r : references) reports.push_back(std::move(r));
  std::string text = render_report(reports);
  if (cfg.pipeline == PipelineKind::kHybrid && !reports[0].records.empty() &&
      !reports[1].records.empty()) {
    text += fmt::format("hybrid mean ADD: coarse {:.2f} mm -> refined {:.2f} mm\n",
                        reports[0].aggregate().add_mm, reports[1].aggregate().add_mm);
  }
  write_file(cfg.output_dir / "report.txt", text);
  out << text;
  return any_success ? kExitOk : kExitFailure;
}

int cmd_report(const std::vector<std::string>& csvs, const std::optional<fs::path>& reference,
               const std::optional<fs::path>& out_dir, std::ostream& out) {
  std::vector<Report> reports;
  for (const auto& path : csvs) {
    for (auto& r : parse_report_csv(read_file(path), path)) {
      auto it = std::find_if(reports.begin(), reports.end(),
                             [&](const Report& x) { return x.method_name == r.method_name; });
      if (it == reports.end()) {
        reports.push_back(std::move(r));
      } else {
        it->records.insert(it->records.end(), r.records.begin(), r.records.end());
      }
    }
  }
  if (reference) {
    for (auto& r : read_reference(*reference)) reports.push_back(std::move(r));
  }
  if (reports.empty()) {
    throw Error(ErrorCode::kEmptyInput, "report needs at least one metrics CSV");
  }
  const std::string text = render_report(reports);
  if (out_dir) {
    ensure_dir(*out_dir);
    write_file(*out_dir / "report.txt", text);
  }
  out << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"pose_forge: 6D object pose estimation toolkit", "pose_forge"};
  cli.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string reference;
  std::vector<std::string> csvs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "run seed (overrides seed)");
  };
  auto* synth = cli.add_subcommand("synth", "write synthetic scenes to disk");
  add_common(synth);
  auto* train_cmd = cli.add_subcommand("train", "train the pose regressor");
  add_common(train_cmd);
  auto* pipeline = cli.add_subcommand("pipeline", "run a pose pipeline and report metrics");
  add_common(pipeline);
  pipeline->add_option("--inject-reference", reference,
                       "metrics CSV of published values shown as [reference] columns");
  auto* report = cli.add_subcommand("report", "merge metrics CSVs into one table");
  report->add_option("csv", csvs, "metrics CSV files");
  report->add_option("--inject-reference", reference,
                     "metrics CSV of published values shown as [reference] columns");
  report->add_option("--out", out_dir, "also write report.txt here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    cli.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  const auto seed_given = [](CLI::App* sub) { return sub->count("--seed") > 0; };
  try {
    if (report->parsed()) {
      return cmd_report(csvs, reference.empty() ? std::nullopt : std::optional<fs::path>(reference),
                        out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir), out);
    }
    CLI::App* sub = synth->parsed() ? synth : train_cmd->parsed() ? train_cmd : pipeline;
    RunConfig cfg = parse_config(config_path);
    if (seed_given(sub)) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (sub == synth) return cmd_synth(cfg, out);
    if (sub == train_cmd) return cmd_train(cfg, out);
    return cmd_pipeline(cfg, reference.empty() ? std::nullopt : std::optional<fs::path>(reference),
                        out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const bool config = e.code() == ErrorCode::kInvalidConfig ||
                        e.code() == ErrorCode::kConfigRejected;
    return config ? kExitInvalidConfig : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace pose_forge::app
