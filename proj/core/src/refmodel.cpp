#include "segadv/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segadv/container.hpp"
#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"
#include "segadv/parallel.hpp"
#include "segadv/random.hpp"

namespace segadv::model {

using autodiff::NodeId;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw InputError("image must be H x W x 3, got " + shape_string(image.dims()));
  }
  if (!image.all_finite()) throw InputError("image contains non-finite values");
}

Tensor he_normal(Shape dims, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(dims));
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (float& v : t.values()) v = static_cast<float>(sd * rng.normal());
  return t;
}

std::array<float, 3> inverse(const std::array<float, 3>& d) { return {1.0f / d[0], 1.0f / d[1], 1.0f / d[2]}; }

}  // namespace

void ModelParams::validate() const {
  require(classes >= 2, "model needs at least 2 classes");
  const std::size_t h = kHiddenChannels;
  require(conv1_kernel.dims() == Shape{3, 3, 3, h}, "conv1 kernel must be 3x3x3x16");
  require(conv1_bias.dims() == Shape{h}, "conv1 bias must have 16 entries");
  require(conv2_kernel.dims() == Shape{3, 3, h, h}, "conv2 kernel must be 3x3x16x16");
  require(conv2_bias.dims() == Shape{h}, "conv2 bias must have 16 entries");
  require(head_kernel.dims() == Shape{1, 1, h, classes}, "head kernel must be 1x1x16xC");
  require(head_bias.dims() == Shape{classes}, "head bias must have C entries");
  for (const Tensor* t : tensors()) require(t->all_finite(), "model parameters must be finite");
  for (float d : norm.divisor) require(d != 0.0f && std::isfinite(d), "normalization divisor must be finite and non-zero");
}

std::array<Tensor*, 6> ModelParams::tensors() {
  return {&conv1_kernel, &conv1_bias, &conv2_kernel, &conv2_bias, &head_kernel, &head_bias};
}

std::array<const Tensor*, 6> ModelParams::tensors() const {
  return {&conv1_kernel, &conv1_bias, &conv2_kernel, &conv2_bias, &head_kernel, &head_bias};
}

ModelParams init_params(std::size_t classes, std::uint64_t seed, Normalization norm, InitOptions opts) {
  const std::size_t h = kHiddenChannels;
  Rng rng(derive_seed(seed, 0x696e6974));  // "init"
  ModelParams p;
  p.classes = classes;
  p.seed = seed;
  p.norm = norm;
  p.conv1_kernel = he_normal({3, 3, 3, h}, 27, rng);
  p.conv1_bias = Tensor({h});
  p.conv2_kernel = he_normal({3, 3, h, h}, 9 * h, rng);
  p.conv2_bias = Tensor({h});
  p.head_kernel = opts.zero_head ? Tensor({1, 1, h, classes}) : he_normal({1, 1, h, classes}, h, rng);
  p.head_bias = Tensor({classes});
  p.validate();
  return p;
}

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning rate must be finite and non-negative");
  require(batch_size >= 1, "batch size must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"epochs", cfg.epochs},
                     {"learning_rate", cfg.learning_rate},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"norm_mean", cfg.norm.mean},
                     {"norm_divisor", cfg.norm.divisor}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  cfg = TrainConfig{};
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.norm.mean = j.value("norm_mean", cfg.norm.mean);
  cfg.norm.divisor = j.value("norm_divisor", cfg.norm.divisor);
}

ForwardGraph build_graph(const ModelParams& model, const Tensor& image, const LabelMap& target,
                         const Tensor& pixel_weights, bool input_grad, bool param_grads) {
  check_image(image);
  if (image.dim(0) != target.height() || image.dim(1) != target.width()) {
    throw InputError("target map does not match image size");
  }
  ForwardGraph g;
  auto& t = g.tape;
  const auto scale = inverse(model.norm.divisor);
  g.image = t.leaf(image, input_grad);
  g.normalized = t.channel_affine(g.image, model.norm.mean, scale);
  g.conv1_kernel = t.leaf(model.conv1_kernel, param_grads);
  g.conv1_bias = t.leaf(model.conv1_bias, param_grads);
  g.conv1 = t.conv2d(g.normalized, g.conv1_kernel, g.conv1_bias);
  g.relu1 = t.relu(g.conv1);
  g.conv2_kernel = t.leaf(model.conv2_kernel, param_grads);
  g.conv2_bias = t.leaf(model.conv2_bias, param_grads);
  g.conv2 = t.conv2d(g.relu1, g.conv2_kernel, g.conv2_bias);
  g.relu2 = t.relu(g.conv2);
  g.head_kernel = t.leaf(model.head_kernel, param_grads);
  g.head_bias = t.leaf(model.head_bias, param_grads);
  g.logits = t.conv2d(g.relu2, g.head_kernel, g.head_bias);
  g.loss = t.softmax_cross_entropy(g.logits, target, pixel_weights);
  return g;
}

Tensor forward_logits(const ModelParams& model, const Tensor& image) {
  check_image(image);
  const auto scale = inverse(model.norm.divisor);
  Tensor x = image;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = (x[k] - model.norm.mean[k % 3]) * scale[k % 3];
  Tensor a1 = autodiff::relu_forward(autodiff::conv2d_forward(x, model.conv1_kernel, model.conv1_bias));
  Tensor a2 = autodiff::relu_forward(autodiff::conv2d_forward(a1, model.conv2_kernel, model.conv2_bias));
  return autodiff::conv2d_forward(a2, model.head_kernel, model.head_bias);
}

ProbabilityMap predict(const ModelParams& model, const Tensor& image) {
  Tensor logits = forward_logits(model, image);
  const std::size_t h = logits.dim(0), w = logits.dim(1);
  // Softmax shares the cross-entropy kernel; zero weights make the loss part free.
  return autodiff::softmax_cross_entropy(logits, LabelMap(h, w, 0), Tensor({h, w}, 0.0f)).probs;
}

LabelMap predict_labels(const ModelParams& model, const Tensor& image) { return predict(model, image).argmax(); }

LossGrad loss_input_grad(const ModelParams& model, const Tensor& image, const LabelMap& target,
                         const Tensor& pixel_weights) {
  ForwardGraph g = build_graph(model, image, target, pixel_weights, true, false);
  g.tape.backward({g.loss});
  return {g.tape.loss(g.loss), g.tape.grad(g.image), g.tape.probs(g.loss)};
}

Tensor uniform_weights(std::size_t height, std::size_t width, float value) { return Tensor({height, width}, value); }

ModelParams train(std::span<const synth::SegSample> samples, std::size_t classes, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  return train_from(init_params(classes, cfg.seed, cfg.norm), samples, cfg, on_epoch);
}

ModelParams train_from(ModelParams params, std::span<const synth::SegSample> samples, const TrainConfig& cfg,
                       const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  params.validate();
  if (samples.empty()) throw InputError("training set is empty");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 0x73676400));  // "sgd"

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::array<Tensor, 6>> grads(count);
      std::vector<double> losses(count);

      parallel_for(count, [&](std::size_t b) {
        const auto& s = samples[order[start + b]];
        ForwardGraph g =
            build_graph(params, s.image, s.labels, uniform_weights(s.labels.height(), s.labels.width()), false, true);
        g.tape.backward({g.loss});
        losses[b] = g.tape.loss(g.loss);
        grads[b] = {g.tape.grad(g.conv1_kernel), g.tape.grad(g.conv1_bias), g.tape.grad(g.conv2_kernel),
                    g.tape.grad(g.conv2_bias),   g.tape.grad(g.head_kernel), g.tape.grad(g.head_bias)};
      });

      for (std::size_t b = 0; b < count; ++b) {
        if (!std::isfinite(losses[b])) {
          throw TrainingError("training diverged in epoch " + std::to_string(epoch) + " (non-finite loss)");
        }
        epoch_loss += losses[b];
      }

      const float step = static_cast<float>(cfg.learning_rate / static_cast<double>(count));
      if (step == 0.0f) continue;
      auto targets = params.tensors();
      for (std::size_t p = 0; p < targets.size(); ++p) {
        Tensor& w = *targets[p];
        for (std::size_t b = 0; b < count; ++b) {
          const Tensor& g = grads[b][p];
          for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * g[k];
        }
      }
    }

    for (const Tensor* t : params.tensors()) {
      if (!t->all_finite()) {
        throw TrainingError("training diverged in epoch " + std::to_string(epoch) + " (non-finite parameters)");
      }
    }
    if (on_epoch) on_epoch({epoch, epoch_loss / static_cast<double>(samples.size())});
  }
  return params;
}

double pixel_accuracy(const ModelParams& model, std::span<const synth::SegSample> samples) {
  std::vector<std::size_t> correct(samples.size());
  parallel_for(samples.size(), [&](std::size_t k) {
    const LabelMap pred = predict_labels(model, samples[k].image);
    std::size_t c = 0;
    for (std::size_t p = 0; p < pred.size(); ++p) c += pred[p] == samples[k].labels[p] ? 1 : 0;
    correct[k] = c;
  });
  std::size_t total = 0, hits = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    hits += correct[k];
    total += samples[k].labels.size();
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Double-precision local evaluator used as the finite-difference oracle.

namespace {

struct LocalTensor {
  std::ptrdiff_t top = 0, left = 0, rows = 0, cols = 0, channels = 0;
  std::vector<double> data;

  double& at(std::ptrdiff_t i, std::ptrdiff_t j, std::ptrdiff_t c) {
    return data[static_cast<std::size_t>(((i - top) * cols + (j - left)) * channels + c)];
  }
  double at(std::ptrdiff_t i, std::ptrdiff_t j, std::ptrdiff_t c) const {
    return data[static_cast<std::size_t>(((i - top) * cols + (j - left)) * channels + c)];
  }
};

LocalTensor make_local(std::ptrdiff_t ci, std::ptrdiff_t cj, std::ptrdiff_t radius, std::ptrdiff_t channels) {
  LocalTensor t;
  t.top = ci - radius;
  t.left = cj - radius;
  t.rows = t.cols = 2 * radius + 1;
  t.channels = channels;
  t.data.assign(static_cast<std::size_t>(t.rows * t.cols * channels), 0.0);
  return t;
}

// Same-padded convolution evaluated on the window of `out`; positions outside
// the image stay zero so they act as padding for the next layer.
void local_conv(const LocalTensor& in, const Tensor& kernel, const Tensor& bias, LocalTensor& out, std::ptrdiff_t h,
                std::ptrdiff_t w, bool relu) {
  const auto k = static_cast<std::ptrdiff_t>(kernel.dim(0));
  const auto cin = static_cast<std::ptrdiff_t>(kernel.dim(2));
  const auto cout = static_cast<std::ptrdiff_t>(kernel.dim(3));
  const std::ptrdiff_t pad = k / 2;
  for (std::ptrdiff_t i = out.top; i < out.top + out.rows; ++i) {
    for (std::ptrdiff_t j = out.left; j < out.left + out.cols; ++j) {
      if (i < 0 || j < 0 || i >= h || j >= w) continue;
      for (std::ptrdiff_t o = 0; o < cout; ++o) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (std::ptrdiff_t u = 0; u < k; ++u) {
          for (std::ptrdiff_t v = 0; v < k; ++v) {
            for (std::ptrdiff_t c = 0; c < cin; ++c) {
              const double kv = kernel[static_cast<std::size_t>(((u * k + v) * cin + c) * cout + o)];
              acc += in.at(i + u - pad, j + v - pad, c) * kv;
            }
          }
        }
        out.at(i, j, o) = relu ? std::max(acc, 0.0) : acc;
      }
    }
  }
}

}  // namespace

double local_loss_sum(const ModelParams& model, const Tensor& image, const LabelMap& target,
                      const Tensor& pixel_weights, std::size_t ci_u, std::size_t cj_u) {
  const auto h = static_cast<std::ptrdiff_t>(image.dim(0));
  const auto w = static_cast<std::ptrdiff_t>(image.dim(1));
  const auto ci = static_cast<std::ptrdiff_t>(ci_u), cj = static_cast<std::ptrdiff_t>(cj_u);
  const auto hidden = static_cast<std::ptrdiff_t>(kHiddenChannels);
  const auto classes = static_cast<std::ptrdiff_t>(model.classes);

  LocalTensor x = make_local(ci, cj, 4, 3);
  for (std::ptrdiff_t i = x.top; i < x.top + x.rows; ++i) {
    for (std::ptrdiff_t j = x.left; j < x.left + x.cols; ++j) {
      if (i < 0 || j < 0 || i >= h || j >= w) continue;
      for (std::ptrdiff_t c = 0; c < 3; ++c) {
        const double raw = image.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(c));
        x.at(i, j, c) = (raw - static_cast<double>(model.norm.mean[static_cast<std::size_t>(c)])) /
                        static_cast<double>(model.norm.divisor[static_cast<std::size_t>(c)]);
      }
    }
  }
  LocalTensor a1 = make_local(ci, cj, 3, hidden);
  local_conv(x, model.conv1_kernel, model.conv1_bias, a1, h, w, true);
  LocalTensor a2 = make_local(ci, cj, 2, hidden);
  local_conv(a1, model.conv2_kernel, model.conv2_bias, a2, h, w, true);
  LocalTensor z = make_local(ci, cj, 2, classes);
  local_conv(a2, model.head_kernel, model.head_bias, z, h, w, false);

  double total = 0.0;
  for (std::ptrdiff_t i = z.top; i < z.top + z.rows; ++i) {
    for (std::ptrdiff_t j = z.left; j < z.left + z.cols; ++j) {
      if (i < 0 || j < 0 || i >= h || j >= w) continue;
      const auto flat = static_cast<std::size_t>(i * w + j);
      double zmax = z.at(i, j, 0);
      for (std::ptrdiff_t c = 1; c < classes; ++c) zmax = std::max(zmax, z.at(i, j, c));
      double sum = 0.0;
      for (std::ptrdiff_t c = 0; c < classes; ++c) sum += std::exp(z.at(i, j, c) - zmax);
      const double ce = std::log(sum) - (z.at(i, j, target[flat]) - zmax);
      total += static_cast<double>(pixel_weights[flat]) * ce;
    }
  }
  return total;
}

CheckReport grad_check(const ModelParams& model, const Tensor& image, const LabelMap& target,
                       const Tensor& pixel_weights, const GradCheckOptions& opts, const InputGradientFn& analytic) {
  check_image(image);
  const Tensor grad =
      analytic ? analytic(image) : loss_input_grad(model, image, target, pixel_weights).grad;
  if (grad.dims() != image.dims()) throw InternalError("analytic gradient has wrong shape");

  double scale = 0.0;
  for (float g : grad.values()) scale = std::max(scale, static_cast<double>(std::fabs(g)));
  const double floor = 1e-6 * scale;
  const double inv_pixels = 1.0 / static_cast<double>(image.dim(0) * image.dim(1));

  Rng rng(opts.seed);
  CheckReport report;
  report.entries.reserve(opts.samples);
  Tensor probe = image;
  for (std::size_t s = 0; s < opts.samples; ++s) {
    GradCheckEntry e;
    e.i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(image.dim(0)) - 1));
    e.j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(image.dim(1)) - 1));
    e.channel = static_cast<std::size_t>(rng.uniform_int(0, 2));
    const float original = image.at(e.i, e.j, e.channel);

    probe.at(e.i, e.j, e.channel) = static_cast<float>(original + opts.step);
    const double up = local_loss_sum(model, probe, target, pixel_weights, e.i, e.j);
    probe.at(e.i, e.j, e.channel) = static_cast<float>(original - opts.step);
    const double down = local_loss_sum(model, probe, target, pixel_weights, e.i, e.j);
    probe.at(e.i, e.j, e.channel) = original;
    const double h_up = static_cast<double>(static_cast<float>(original + opts.step)) - original;
    const double h_down = original - static_cast<double>(static_cast<float>(original - opts.step));

    e.analytic = grad.at(e.i, e.j, e.channel);
    e.numeric = (up - down) * inv_pixels / (h_up + h_down);
    const double denom = std::max({std::fabs(e.analytic), std::fabs(e.numeric), floor});
    e.rel_error = denom > 0.0 ? std::fabs(e.analytic - e.numeric) / denom : 0.0;
    report.entries.push_back(e);
  }

  std::vector<double> errs;
  errs.reserve(report.entries.size());
  for (const auto& e : report.entries) errs.push_back(e.rel_error);
  std::sort(errs.begin(), errs.end());
  if (!errs.empty()) {
    const auto within = std::count_if(errs.begin(), errs.end(), [&](double r) { return r < opts.rel_tol; });
    report.fraction_within = static_cast<double>(within) / static_cast<double>(errs.size());
    const std::size_t n = errs.size();
    report.median_rel_error = n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
    report.p95_rel_error = errs[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
    report.max_rel_error = errs.back();
  }
  report.passed = report.fraction_within >= opts.pass_fraction && report.median_rel_error < opts.median_tol;
  return report;
}

void to_json(nlohmann::json& j, const GradCheckOptions& o) {
  j = {{"samples", o.samples},     {"step", o.step},         {"rel_tol", o.rel_tol},
       {"pass_fraction", o.pass_fraction}, {"median_tol", o.median_tol}, {"seed", o.seed}};
}

void from_json(const nlohmann::json& j, GradCheckOptions& o) {
  o = GradCheckOptions{};
  o.samples = j.value("samples", o.samples);
  o.step = j.value("step", o.step);
  o.rel_tol = j.value("rel_tol", o.rel_tol);
  o.pass_fraction = j.value("pass_fraction", o.pass_fraction);
  o.median_tol = j.value("median_tol", o.median_tol);
  o.seed = j.value("seed", o.seed);
  if (o.samples == 0 || !(o.step > 0.0)) throw ConfigError("gradcheck needs samples > 0 and step > 0");
}

void to_json(nlohmann::json& j, const CheckReport& r) {
  j = nlohmann::json{{"passed", r.passed},
                     {"samples", r.entries.size()},
                     {"fraction_within", r.fraction_within},
                     {"median_rel_error", r.median_rel_error},
                     {"p95_rel_error", r.p95_rel_error},
                     {"max_rel_error", r.max_rel_error}};
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::array<const char*, 6> kTensorNames = {"conv1_kernel", "conv1_bias", "conv2_kernel",
                                                     "conv2_bias",   "head_kernel", "head_bias"};
}

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& model) {
  model.validate();
  const auto tensors = model.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) io::write_tensor(dir / (std::string(kTensorNames[k]) + ".ten"), *tensors[k]);
  nlohmann::json meta = {{"architecture", "conv3x3(3->16)-relu-conv3x3(16->16)-relu-conv1x1(16->C)"},
                         {"classes", model.classes},
                         {"seed", model.seed},
                         {"norm_mean", model.norm.mean},
                         {"norm_divisor", model.norm.divisor},
                         {"tensors", kTensorNames}};
  io::write_json(dir / "model.json", meta);
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "model.json");
  ModelParams p;
  p.classes = meta.at("classes").get<std::size_t>();
  p.seed = meta.at("seed").get<std::uint64_t>();
  p.norm.mean = meta.at("norm_mean").get<std::array<float, 3>>();
  p.norm.divisor = meta.at("norm_divisor").get<std::array<float, 3>>();
  auto tensors = p.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) *tensors[k] = io::read_tensor(dir / (std::string(kTensorNames[k]) + ".ten"));
  p.validate();
  return p;
}

}  // namespace segadv::model
