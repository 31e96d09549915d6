#include "pose_forge/metrics.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pose_forge/error.h"
#include "pose_forge/nn_search.h"
#include "pose_forge/text_util.h"

namespace pose_forge {
namespace {

std::vector<Vec3> transform_points(const std::vector<Vec3>& points, const Pose& pose) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

// Display width in terminal columns; every non-continuation UTF-8 byte
// starts one column.
std::size_t display_width(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string pad_right(std::string_view s, std::size_t width) {
  std::string out(s);
  const std::size_t w = display_width(s);
  if (w < width) out.append(width - w, ' ');
  return out;
}

std::string pad_left(std::string_view s, std::size_t width) {
  const std::size_t w = display_width(s);
  std::string out = w < width ? std::string(width - w, ' ') : std::string();
  out.append(s);
  return out;
}

constexpr std::string_view kRowLabels[] = {
    "ADD Distance (mm)",
    "ADD-S Distance (mm)",
    "Rotation Error (°)",
    "Translation Error (mm)",
};

}  // namespace

double add_metric(const ObjectModel& model, const Pose& pred, const Pose& gt) {
  double sum = 0.0;
  for (const auto& x : model.points) {
    sum += (pred.apply(x) - gt.apply(x)).norm();
  }
  return sum / static_cast<double>(model.points.size());
}

double adds_metric(const ObjectModel& model, const Pose& pred, const Pose& gt) {
  const NearestNeighborIndex gt_index(transform_points(model.points, gt));
  double sum = 0.0;
  for (const auto& x : model.points) {
    sum += std::sqrt(gt_index.nearest(pred.apply(x)).squared_distance);
  }
  return sum / static_cast<double>(model.points.size());
}

EvalRecord evaluate_scene(const ObjectModel& model, const Pose& pred,
                          const Pose& gt, std::string scene_id) {
  return {std::move(scene_id), add_metric(model, pred, gt),
          adds_metric(model, pred, gt),
          rotation_geodesic_deg(pred.rotation, gt.rotation),
          translation_error_mm(pred.translation, gt.translation)};
}

MetricMeans Report::aggregate() const {
  MetricMeans m;
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.add_mm += r.add_mm;
    m.adds_mm += r.adds_mm;
    m.rot_err_deg += r.rot_err_deg;
    m.trans_err_mm += r.trans_err_mm;
  }
  const auto n = static_cast<double>(records.size());
  m.add_mm /= n;
  m.adds_mm /= n;
  m.rot_err_deg /= n;
  m.trans_err_mm /= n;
  return m;
}

std::string render_report(std::span<const Report> reports) {
  std::size_t label_width = display_width("Metric");
  for (const auto label : kRowLabels) {
    label_width = std::max(label_width, display_width(label));
  }

  std::vector<std::size_t> widths;
  std::vector<MetricMeans> means;
  for (const auto& r : reports) {
    widths.push_back(std::max<std::size_t>(display_width(r.method_name), 6));
    means.push_back(r.aggregate());
  }

  std::string out = pad_right("Metric", label_width);
  for (std::size_t c = 0; c < reports.size(); ++c) {
    out += "  " + pad_left(reports[c].method_name, widths[c]);
  }
  out += '\n';

  for (std::size_t row = 0; row < std::size(kRowLabels); ++row) {
    out += pad_right(kRowLabels[row], label_width);
    for (std::size_t c = 0; c < reports.size(); ++c) {
      const MetricMeans& m = means[c];
      const double value = row == 0   ? m.add_mm
                           : row == 1 ? m.adds_mm
                           : row == 2 ? m.rot_err_deg
                                      : m.trans_err_mm;
      const std::string cell = reports[c].records.empty()
                                   ? std::string("n/a")
                                   : fmt::format("{:.2f}", value);
      out += "  " + pad_left(cell, widths[c]);
    }
    out += '\n';
  }

  std::vector<std::string> reference_names;
  for (const auto& r : reports) {
    if (r.reference) reference_names.push_back(r.method_name);
  }
  if (!reference_names.empty()) {
    out += fmt::format("[reference] {}: published values, not measured by this run\n",
                       fmt::join(reference_names, ", "));
  }
  for (const auto& r : reports) {
    if (r.failures.empty()) continue;
    out += fmt::format("{}: {} scene(s) evaluated, {} failed\n", r.method_name,
                       r.records.size(), r.failures.size());
    for (const auto& f : r.failures) {
      out += fmt::format("  failed {}: {}\n", f.scene_id, f.reason);
    }
  }
  return out;
}

std::string render_csv(std::span<const Report> reports) {
  std::string out(kReportCsvHeader);
  out += '\n';
  for (const auto& r : reports) {
    for (const auto& rec : r.records) {
      out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.method_name,
                         rec.scene_id, rec.add_mm, rec.adds_mm, rec.rot_err_deg,
                         rec.trans_err_mm);
    }
  }
  return out;
}

std::vector<Report> parse_report_csv(std::string_view text, std::string_view source) {
  std::vector<Report> reports;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != kReportCsvHeader) {
        throw Error(ErrorCode::kMalformedHeader,
                    fmt::format("{}:{}: expected header '{}'", source, line_no,
                                kReportCsvHeader),
                    line_no);
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_char(line, ',');
    if (fields.size() != 6) {
      throw Error(ErrorCode::kNonNumericValue,
                  fmt::format("{}:{}: expected 6 fields, found {}", source,
                              line_no, fields.size()),
                  line_no);
    }
    double values[4];
    for (int i = 0; i < 4; ++i) {
      const auto v = parse_double(fields[2 + i]);
      if (!v || !std::isfinite(*v) || *v < 0.0) {
        throw Error(ErrorCode::kNonNumericValue,
                    fmt::format("{}:{}: bad metric value '{}'", source, line_no,
                                fields[2 + i]),
                    line_no);
      }
      values[i] = *v;
    }
    const std::string method(trim(fields[0]));
    auto it = std::find_if(reports.begin(), reports.end(),
                           [&](const Report& r) { return r.method_name == method; });
    if (it == reports.end()) {
      reports.push_back(Report{method, {}, {}, false});
      it = reports.end() - 1;
    }
    it->records.push_back(EvalRecord{std::string(trim(fields[1])), values[0],
                                     values[1], values[2], values[3]});
  }
  if (!header_seen || reports.empty()) {
    throw Error(ErrorCode::kEmptyInput,
                fmt::format("{}: no metric rows", source), line_no);
  }
  return reports;
}

}  // namespace pose_forge
