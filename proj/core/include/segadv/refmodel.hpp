#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "segadv/autodiff.hpp"
#include "segadv/synthdata.hpp"
#include "segadv/tensor.hpp"

// The stand-in segmentation network f(x;w):
//   normalize -> conv3x3(3->16) -> ReLU -> conv3x3(16->16) -> ReLU -> conv1x1(16->C)
// followed by a per-pixel softmax. No pooling, so every logit depends on a
// 5x5 input window.
namespace segadv::model {

inline constexpr std::size_t kHiddenChannels = 16;

/// Input normalization applied inside the network: (x - mean) / divisor.
struct Normalization {
  std::array<float, 3> mean{127.5f, 127.5f, 127.5f};
  std::array<float, 3> divisor{127.5f, 127.5f, 127.5f};

  bool operator==(const Normalization&) const = default;
};

struct ModelParams {
  std::size_t classes = 0;
  std::uint64_t seed = 0;
  Normalization norm;
  Tensor conv1_kernel;  // 3x3x3x16
  Tensor conv1_bias;    // 16
  Tensor conv2_kernel;  // 3x3x16x16
  Tensor conv2_bias;    // 16
  Tensor head_kernel;   // 1x1x16xC
  Tensor head_bias;     // C

  void validate() const;
  bool operator==(const ModelParams&) const = default;

  std::array<Tensor*, 6> tensors();
  std::array<const Tensor*, 6> tensors() const;
};

struct InitOptions {
  bool zero_head = false;
};

/// He-normal convolution weights, zero biases.
ModelParams init_params(std::size_t classes, std::uint64_t seed, Normalization norm = {}, InitOptions opts = {});

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::size_t batch_size = 8;
  std::uint64_t seed = 7;
  Normalization norm;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Node handles of one recorded forward pass.
struct ForwardGraph {
  autodiff::Tape tape;
  autodiff::NodeId image, normalized;
  autodiff::NodeId conv1_kernel, conv1_bias, conv1, relu1;
  autodiff::NodeId conv2_kernel, conv2_bias, conv2, relu2;
  autodiff::NodeId head_kernel, head_bias, logits, loss;
};

ForwardGraph build_graph(const ModelParams& model, const Tensor& image, const LabelMap& target,
                         const Tensor& pixel_weights, bool input_grad, bool param_grads);

Tensor forward_logits(const ModelParams& model, const Tensor& image);
ProbabilityMap predict(const ModelParams& model, const Tensor& image);
LabelMap predict_labels(const ModelParams& model, const Tensor& image);

struct LossGrad {
  double loss = 0.0;
  Tensor grad;  // d loss / d raw pixel, H x W x 3
  ProbabilityMap probs;
};

/// Weighted mean cross-entropy and its gradient w.r.t. the raw 0-255 pixels.
LossGrad loss_input_grad(const ModelParams& model, const Tensor& image, const LabelMap& target,
                         const Tensor& pixel_weights);

Tensor uniform_weights(std::size_t height, std::size_t width, float value = 1.0f);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

/// Mini-batch SGD on the mean cross-entropy. Deterministic for a fixed seed.
ModelParams train(std::span<const synth::SegSample> samples, std::size_t classes, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

/// Same as train() but starting from given parameters.
ModelParams train_from(ModelParams start, std::span<const synth::SegSample> samples, const TrainConfig& cfg,
                       const std::function<void(const EpochStats&)>& on_epoch = {});

double pixel_accuracy(const ModelParams& model, std::span<const synth::SegSample> samples);

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckOptions {
  std::size_t samples = 200;
  double step = 0.1;  // pixel units
  double rel_tol = 1e-2;
  double pass_fraction = 0.95;
  double median_tol = 1e-3;
  std::uint64_t seed = 11;
};

void to_json(nlohmann::json& j, const GradCheckOptions& opts);
void from_json(const nlohmann::json& j, GradCheckOptions& opts);

struct GradCheckEntry {
  std::size_t i = 0, j = 0, channel = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct CheckReport {
  bool passed = false;
  double fraction_within = 0.0;
  double median_rel_error = 0.0;
  double p95_rel_error = 0.0;
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

void to_json(nlohmann::json& j, const CheckReport& r);

using InputGradientFn = std::function<Tensor(const Tensor& image)>;

/// Compares the analytic input gradient (loss_input_grad unless `analytic` is
/// given) with central differences of a double-precision evaluation of the
/// same network. Relative error is |a - n| / max(|a|, |n|, 1e-6 * max|a|).
CheckReport grad_check(const ModelParams& model, const Tensor& image, const LabelMap& target,
                       const Tensor& pixel_weights, const GradCheckOptions& opts = {},
                       const InputGradientFn& analytic = {});

/// Double-precision loss restricted to output pixels whose receptive field
/// contains (ci, cj): sum of w_ij * CE_ij (not divided by |I|).
double local_loss_sum(const ModelParams& model, const Tensor& image, const LabelMap& target,
                      const Tensor& pixel_weights, std::size_t ci, std::size_t cj);

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/<tensor>.ten plus <dir>/model.json.

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& model);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace segadv::model
