#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pose_forge/geometry.h"

namespace pose_forge {

enum class FeatureRole { kVisual, kSemantic };

struct FeatureVector {
  Eigen::VectorXd values;
  FeatureRole role = FeatureRole::kVisual;
};

inline constexpr std::size_t kDefaultHiddenWidth = 256;
inline constexpr std::size_t kPoseOutputWidth = 7;  // raw quaternion (4) + translation (3)

// input -> hidden -> hidden -> 7 with tanh on both hidden layers. The last
// three outputs are scaled by translation_scale_mm to give millimeters, so
// the network itself works at O(1) magnitudes.
struct MlpParams {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
  double translation_scale_mm = 1000.0;

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, streams keyed by seed.
  static MlpParams initialize(std::size_t input_dim, std::size_t hidden,
                              std::uint64_t seed);
  static MlpParams zeros(std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t parameter_count() const;

  // Order: w1, b1, w2, b2, w3, b3; matrices column-major.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

struct PosePrediction {
  Quaternion rotation;  // normalized, sign as produced by the network
  Vec3 translation_mm = Vec3::Zero();
};

// Runs the head on visual (+) semantic. Throws kDimensionMismatch,
// kDegenerateOutput (raw quaternion norm < 1e-8) or kNumericFailure.
PosePrediction forward(const MlpParams& params, const FeatureVector& visual,
                       const FeatureVector& semantic);

Pose prediction_to_pose(const PosePrediction& prediction);

// (1 - <q_pred, q_gt>^2) + translation_weight * ||t_pred - t_gt||^2
double pose_loss(const PosePrediction& pred, const Pose& gt, double translation_weight);

struct RegressionSample {
  FeatureVector visual;
  FeatureVector semantic;
  Pose gt;
};

double mean_loss(const MlpParams& params, std::span<const RegressionSample> batch,
                 double translation_weight);

// Analytic gradient of mean_loss over the batch (no weight decay), returned
// in the same layout as the parameters. Summation order is fixed.
MlpParams backward(const MlpParams& params, std::span<const RegressionSample> batch,
                   double translation_weight);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-4;
  double weight_decay = 1e-2;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double translation_weight = 1e-4;  // per mm^2
  std::size_t hidden = kDefaultHiddenWidth;

  void validate() const;
};

struct TrainResult {
  MlpParams params;
  // loss_trace[0] is the mean loss at initialization, loss_trace[e] after
  // epoch e.
  std::vector<double> loss_trace;
};

// AdamW (beta1 0.9, beta2 0.999, eps 1e-8; decay applied as
// theta *= 1 - lr * weight_decay before the Adam step). Epoch e visits the
// dataset in the order of a Fisher-Yates shuffle drawn from
// RngStream(seed, "train-shuffle", e).
TrainResult train(const TrainConfig& config, std::span<const RegressionSample> dataset);

// Back-to-back VFMT records (w1, b1, w2, b2, w3, b3) with a JSON sidecar
// naming them. Values are stored as f32.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pose_forge
