#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pose_forge/geometry.h"
#include "pose_forge/object_model.h"

namespace pose_forge {

// Mean distance between model points under the predicted and the
// ground-truth pose (ADD).
double add_metric(const ObjectModel& model, const Pose& pred, const Pose& gt);

// Symmetric variant (ADD-S): each prediction-transformed point is matched to
// the closest ground-truth-transformed point. Always <= add_metric.
double adds_metric(const ObjectModel& model, const Pose& pred, const Pose& gt);

struct EvalRecord {
  std::string scene_id;
  double add_mm = 0.0;
  double adds_mm = 0.0;
  double rot_err_deg = 0.0;
  double trans_err_mm = 0.0;
};

// Both ADD and ADD-S are always reported; ObjectModel::symmetric only tells a
// downstream consumer which column to threshold.
EvalRecord evaluate_scene(const ObjectModel& model, const Pose& pred,
                          const Pose& gt, std::string scene_id = {});

struct SceneFailure {
  std::string scene_id;
  std::string reason;
};

struct MetricMeans {
  double add_mm = 0.0;
  double adds_mm = 0.0;
  double rot_err_deg = 0.0;
  double trans_err_mm = 0.0;
};

struct Report {
  std::string method_name;
  std::vector<EvalRecord> records;
  std::vector<SceneFailure> failures;
  // Published numbers injected for format comparison, not measured.
  bool reference = false;

  // Unweighted arithmetic mean over records, summed in record order.
  MetricMeans aggregate() const;
};

inline constexpr std::string_view kReportCsvHeader =
    "method,scene_id,add_mm,adds_mm,rot_err_deg,trans_err_mm";

// Fixed-width text table, one column per method, rows in the order
// ADD / ADD-S / rotation / translation, values to two decimals.
std::string render_report(std::span<const Report> reports);

// Per-scene CSV with kReportCsvHeader. Values are written with 6 decimals.
std::string render_csv(std::span<const Report> reports);

// Parses a metrics CSV into one Report per method (first-appearance order).
// Throws kNonNumericValue / kMalformedHeader naming `source` and the line.
std::vector<Report> parse_report_csv(std::string_view text, std::string_view source);

}  // namespace pose_forge
