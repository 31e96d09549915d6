#include "pose_forge/regressor.h"

#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "pose_forge/error.h"
#include "pose_forge/rng.h"
#include "pose_forge/vfmt.h"

namespace pose_forge {
namespace {

constexpr double kMinQuaternionNorm = 1e-8;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

constexpr const char* kTensorNames[] = {"layer1.weight", "layer1.bias",
                                        "layer2.weight", "layer2.bias",
                                        "layer3.weight", "layer3.bias"};

void fill_uniform(Eigen::MatrixXd& m, double bound, RngStream& rng) {
  // Row-major fill order so the draw sequence reads like the weight layout.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
  }
}

void check_finite(const Eigen::MatrixXd& m, int layer) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNumericFailure,
                fmt::format("non-finite activation in layer {}", layer));
  }
}

// Column i holds visual_i (+) semantic_i.
Eigen::MatrixXd stack_inputs(const MlpParams& params,
                             std::span<const RegressionSample> batch) {
  const auto d = static_cast<Eigen::Index>(params.input_dim());
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& v = batch[i].visual.values;
    const auto& s = batch[i].semantic.values;
    if (v.size() + s.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("features have {} + {} values, network expects {}", v.size(),
                              s.size(), d));
    }
    x.col(static_cast<Eigen::Index>(i)) << v, s;
  }
  return x;
}

struct Activations {
  Eigen::MatrixXd h1, h2, out;
};

Activations run(const MlpParams& p, const Eigen::MatrixXd& x) {
  Activations a;
  a.h1 = ((p.w1 * x).colwise() + p.b1).array().tanh().matrix();
  check_finite(a.h1, 1);
  a.h2 = ((p.w2 * a.h1).colwise() + p.b2).array().tanh().matrix();
  check_finite(a.h2, 2);
  a.out = (p.w3 * a.h2).colwise() + p.b3;
  check_finite(a.out, 3);
  return a;
}

PosePrediction decode(const MlpParams& p, const Eigen::VectorXd& out) {
  const Vec4 raw = out.head<4>();
  if (raw.norm() < kMinQuaternionNorm) {
    throw Error(ErrorCode::kDegenerateOutput,
                fmt::format("raw quaternion norm {:.3e} below {:.0e}", raw.norm(),
                            kMinQuaternionNorm));
  }
  return {Quaternion::from_vector(raw), p.translation_scale_mm * Vec3(out.tail<3>())};
}

}  // namespace

MlpParams MlpParams::initialize(std::size_t input_dim, std::size_t hidden,
                                std::uint64_t seed) {
  MlpParams p = zeros(input_dim, hidden);
  const std::size_t fan_in[] = {input_dim, hidden, hidden};
  Eigen::MatrixXd* weights[] = {&p.w1, &p.w2, &p.w3};
  Eigen::VectorXd* biases[] = {&p.b1, &p.b2, &p.b3};
  for (int layer = 0; layer < 3; ++layer) {
    RngStream rng(seed, "mlp-init", static_cast<std::uint64_t>(layer));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[layer]));
    fill_uniform(*weights[layer], bound, rng);
    for (Eigen::Index i = 0; i < biases[layer]->size(); ++i) {
      (*biases[layer])[i] = rng.uniform(-bound, bound);
    }
  }
  return p;
}

MlpParams MlpParams::zeros(std::size_t input_dim, std::size_t hidden) {
  if (input_dim == 0 || hidden == 0) {
    throw Error(ErrorCode::kInvalidArgument, "network widths must be positive");
  }
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto o = static_cast<Eigen::Index>(kPoseOutputWidth);
  MlpParams p;
  p.w1 = Eigen::MatrixXd::Zero(h, d);
  p.b1 = Eigen::VectorXd::Zero(h);
  p.w2 = Eigen::MatrixXd::Zero(h, h);
  p.b2 = Eigen::VectorXd::Zero(h);
  p.w3 = Eigen::MatrixXd::Zero(o, h);
  p.b3 = Eigen::VectorXd::Zero(o);
  return p;
}

std::size_t MlpParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() +
                                  w3.size() + b3.size());
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  auto put = [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
    at += block.size();
  };
  put(w1); put(b1); put(w2); put(b2); put(w3); put(b3);
  return flat;
}

void MlpParams::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "flat parameter vector has wrong length");
  }
  Eigen::Index at = 0;
  auto take = [&](auto& block) {
    Eigen::Map<Eigen::VectorXd>(block.data(), block.size()) = flat.segment(at, block.size());
    at += block.size();
  };
  take(w1); take(b1); take(w2); take(b2); take(w3); take(b3);
}

PosePrediction forward(const MlpParams& params, const FeatureVector& visual,
                       const FeatureVector& semantic) {
  const RegressionSample sample{visual, semantic, Pose{}};
  const Activations a = run(params, stack_inputs(params, {&sample, 1}));
  return decode(params, a.out.col(0));
}

Pose prediction_to_pose(const PosePrediction& prediction) {
  return {quat_to_rotmat(prediction.rotation), prediction.translation_mm};
}

double pose_loss(const PosePrediction& pred, const Pose& gt, double translation_weight) {
  const Vec4 q_gt = rotmat_to_quat(gt.rotation).coeffs();
  const double dot = pred.rotation.coeffs().dot(q_gt);
  return (1.0 - dot * dot) +
         translation_weight * (pred.translation_mm - gt.translation).squaredNorm();
}

double mean_loss(const MlpParams& params, std::span<const RegressionSample> batch,
                 double translation_weight) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  const Activations a = run(params, stack_inputs(params, batch));
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += pose_loss(decode(params, a.out.col(static_cast<Eigen::Index>(i))), batch[i].gt,
                     translation_weight);
  }
  return sum / static_cast<double>(batch.size());
}

MlpParams backward(const MlpParams& params, std::span<const RegressionSample> batch,
                   double translation_weight) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  const Eigen::MatrixXd x = stack_inputs(params, batch);
  const Activations a = run(params, x);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd d_out(static_cast<Eigen::Index>(kPoseOutputWidth), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec4 raw = a.out.col(i).head<4>();
    const double norm = raw.norm();
    if (norm < kMinQuaternionNorm) {
      throw Error(ErrorCode::kDegenerateOutput, "raw quaternion norm vanished in backward");
    }
    const Vec4 q = raw / norm;
    const Vec4 g = rotmat_to_quat(batch[static_cast<std::size_t>(i)].gt.rotation).coeffs();
    const double dot = q.dot(g);
    // d/dq of 1 - (q.g)^2, pulled back through q = raw / |raw|.
    const Vec4 d_q = -2.0 * dot * g;
    const Vec4 d_raw = (d_q - q * q.dot(d_q)) / norm;
    const Vec3 t = params.translation_scale_mm * Vec3(a.out.col(i).tail<3>());
    const Vec3 d_t = 2.0 * translation_weight * params.translation_scale_mm *
                     (t - batch[static_cast<std::size_t>(i)].gt.translation);
    d_out.col(i) << d_raw, d_t;
  }
  d_out *= inv_n;

  MlpParams grad;
  grad.translation_scale_mm = params.translation_scale_mm;
  grad.w3 = d_out * a.h2.transpose();
  grad.b3 = d_out.rowwise().sum();
  const Eigen::MatrixXd d_a2 =
      ((params.w3.transpose() * d_out).array() * (1.0 - a.h2.array().square())).matrix();
  grad.w2 = d_a2 * a.h1.transpose();
  grad.b2 = d_a2.rowwise().sum();
  const Eigen::MatrixXd d_a1 =
      ((params.w2.transpose() * d_a2).array() * (1.0 - a.h1.array().square())).matrix();
  grad.w1 = d_a1 * x.transpose();
  grad.b1 = d_a1.rowwise().sum();

  const int layer_of[] = {1, 1, 2, 2, 3, 3};
  const Eigen::MatrixXd* blocks[] = {&grad.w1, nullptr, &grad.w2, nullptr, &grad.w3, nullptr};
  const Eigen::VectorXd* bias_blocks[] = {nullptr, &grad.b1, nullptr, &grad.b2, nullptr, &grad.b3};
  for (int b = 0; b < 6; ++b) {
    const bool finite = blocks[b] ? blocks[b]->allFinite() : bias_blocks[b]->allFinite();
    if (!finite) {
      throw Error(ErrorCode::kNumericFailure,
                  fmt::format("non-finite gradient in layer {}", layer_of[b]));
    }
  }
  return grad;
}

void TrainConfig::validate() const {
  if (epochs < 0 || !(learning_rate >= 0.0) || !(weight_decay >= 0.0) || batch_size == 0 ||
      !(translation_weight > 0.0) || hidden == 0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training configuration");
  }
}

TrainResult train(const TrainConfig& config, std::span<const RegressionSample> dataset) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::kEmptyInput, "empty training dataset");
  const std::size_t input_dim = static_cast<std::size_t>(dataset.front().visual.values.size() +
                                                         dataset.front().semantic.values.size());

  TrainResult result;
  result.params = MlpParams::initialize(input_dim, config.hidden, config.seed);
  result.loss_trace.push_back(mean_loss(result.params, dataset, config.translation_weight));

  Eigen::VectorXd theta = result.params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  std::vector<std::size_t> order(dataset.size());
  std::vector<RegressionSample> batch;
  long step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(config.seed, "train-shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }

    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);

      Eigen::VectorXd g;
      try {
        g = backward(result.params, batch, config.translation_weight).flatten();
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("epoch {} batch {}: {}", epoch, b, e.what()));
      }
      ++step;
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      theta *= 1.0 - config.learning_rate * config.weight_decay;
      theta.array() -= config.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + kAdamEps);
      result.params.assign(theta);
    }
    try {
      result.loss_trace.push_back(
          mean_loss(result.params, dataset, config.translation_weight));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("epoch {} evaluation: {}", epoch, e.what()));
    }
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  std::vector<Tensor> tensors;
  auto add_matrix = [&](const Eigen::MatrixXd& w) {
    Tensor t{{static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())}, {}};
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) t.data.push_back(static_cast<float>(w(r, c)));
    }
    tensors.push_back(std::move(t));
  };
  auto add_vector = [&](const Eigen::VectorXd& b) {
    Tensor t{{static_cast<std::uint64_t>(b.size())}, {}};
    for (Eigen::Index i = 0; i < b.size(); ++i) t.data.push_back(static_cast<float>(b[i]));
    tensors.push_back(std::move(t));
  };
  add_matrix(params.w1); add_vector(params.b1);
  add_matrix(params.w2); add_vector(params.b2);
  add_matrix(params.w3); add_vector(params.b3);
  write_tensor_records(path, tensors);

  nlohmann::ordered_json meta;
  meta["format"] = "pose-mlp";
  meta["tensors"] = kTensorNames;
  meta["input_dim"] = params.input_dim();
  meta["hidden"] = params.hidden();
  meta["activation"] = "tanh";
  meta["translation_scale_mm"] = params.translation_scale_mm;
  std::ofstream out(sidecar_path(path), std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint sidecar");
  out << meta.dump(2) << '\n';
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  const auto tensors = read_tensor_records(path);
  std::ifstream in(sidecar_path(path));
  if (!in) {
    throw Error(ErrorCode::kMissingFile,
                fmt::format("missing checkpoint sidecar for '{}'", path.string()));
  }
  std::size_t input_dim = 0, hidden = 0;
  double scale = 0.0;
  try {
    const auto meta = nlohmann::json::parse(in);
    input_dim = meta.at("input_dim").get<std::size_t>();
    hidden = meta.at("hidden").get<std::size_t>();
    scale = meta.at("translation_scale_mm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("bad checkpoint sidecar: {}", e.what()));
  }
  MlpParams p = MlpParams::zeros(input_dim, hidden);
  p.translation_scale_mm = scale;
  if (tensors.size() != 6) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("checkpoint holds {} tensors, expected 6", tensors.size()));
  }
  auto read_matrix = [&](const Tensor& t, Eigen::MatrixXd& w) {
    if (t.shape.size() != 2 || t.shape[0] != static_cast<std::uint64_t>(w.rows()) ||
        t.shape[1] != static_cast<std::uint64_t>(w.cols())) {
      throw Error(ErrorCode::kLengthMismatch, "checkpoint weight shape mismatch");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = t.data[k++];
    }
  };
  auto read_vector = [&](const Tensor& t, Eigen::VectorXd& b) {
    if (t.shape.size() != 1 || t.shape[0] != static_cast<std::uint64_t>(b.size())) {
      throw Error(ErrorCode::kLengthMismatch, "checkpoint bias shape mismatch");
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = t.data[static_cast<std::size_t>(i)];
  };
  read_matrix(tensors[0], p.w1); read_vector(tensors[1], p.b1);
  read_matrix(tensors[2], p.w2); read_vector(tensors[3], p.b2);
  read_matrix(tensors[4], p.w3); read_vector(tensors[5], p.b3);
  return p;
}

}  // namespace pose_forge
