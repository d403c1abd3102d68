#include "segadv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segadv/errors.hpp"

namespace segadv::autodiff {
namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.rank() != 3) throw ConfigError("conv2d input must be H x W x Cin, got " + shape_string(input.dims()));
  if (kernel.rank() != 4 || kernel.dim(0) != kernel.dim(1) || kernel.dim(0) % 2 == 0) {
    throw ConfigError("conv2d kernel must be k x k x Cin x Cout with odd k, got " + shape_string(kernel.dims()));
  }
  if (kernel.dim(2) != input.dim(2)) {
    throw ConfigError("conv2d channel mismatch: input " + shape_string(input.dims()) + ", kernel " +
                      shape_string(kernel.dims()));
  }
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(3)) {
    throw ConfigError("conv2d bias must have Cout=" + std::to_string(kernel.dim(3)) + " entries, got " +
                      shape_string(bias.dims()));
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  check_conv_shapes(input, kernel, bias);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernel.dim(0), cout = kernel.dim(3);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  Tensor out({h, w, cout});
  const float* in = input.data();
  const float* ker = kernel.data();
  const float* b = bias.data();
  float* o = out.data();

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      float* out_px = o + (i * w + j) * cout;
      std::copy(b, b + cout, out_px);
      for (std::size_t u = 0; u < k; ++u) {
        const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - pad;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t v = 0; v < k; ++v) {
          const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - pad;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
          const float* in_px = in + (static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)) * cin;
          const float* ker_uv = ker + (u * k + v) * cin * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            const float a = in_px[c];
            if (a == 0.0f) continue;
            const float* krow = ker_uv + c * cout;
            for (std::size_t q = 0; q < cout; ++q) out_px[q] += a * krow[q];
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, bool want_input,
                          bool want_params) {
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernel.dim(0), cout = kernel.dim(3);
  if (grad_out.rank() != 3 || grad_out.dim(0) != h || grad_out.dim(1) != w || grad_out.dim(2) != cout) {
    throw InternalError("conv2d backward: gradient " + shape_string(grad_out.dims()) + " does not match output " +
                        shape_string({h, w, cout}));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  ConvGrads g;
  if (want_input) g.input = Tensor({h, w, cin});
  if (want_params) {
    g.kernel = Tensor(kernel.dims());
    g.bias = Tensor({cout});
  }
  if (!want_input && !want_params) return g;

  const float* in = input.data();
  const float* ker = kernel.data();
  const float* go = grad_out.data();
  float* gin = want_input ? g.input.data() : nullptr;
  float* gker = want_params ? g.kernel.data() : nullptr;

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const float* go_px = go + (i * w + j) * cout;
      if (want_params) {
        float* gb = g.bias.data();
        for (std::size_t q = 0; q < cout; ++q) gb[q] += go_px[q];
      }
      for (std::size_t u = 0; u < k; ++u) {
        const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - pad;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t v = 0; v < k; ++v) {
          const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - pad;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t in_off = (static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)) * cin;
          const std::size_t ker_off = (u * k + v) * cin * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            const float* krow = ker + ker_off + c * cout;
            if (want_input) {
              float acc = 0.0f;
              for (std::size_t q = 0; q < cout; ++q) acc += go_px[q] * krow[q];
              gin[in_off + c] += acc;
            }
            if (want_params) {
              const float a = in[in_off + c];
              if (a == 0.0f) continue;
              float* gk = gker + ker_off + c * cout;
              for (std::size_t q = 0; q < cout; ++q) gk[q] += a * go_px[q];
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (input.dims() != grad_out.dims()) {
    throw InternalError("relu backward: gradient " + shape_string(grad_out.dims()) + " vs input " +
                        shape_string(input.dims()));
  }
  Tensor g(input.dims());
  for (std::size_t n = 0; n < input.size(); ++n) g[n] = input[n] > 0.0f ? grad_out[n] : 0.0f;
  return g;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, const LabelMap& target, const Tensor& pixel_weights) {
  if (logits.rank() != 3) throw ConfigError("logits must be H x W x C, got " + shape_string(logits.dims()));
  const std::size_t h = logits.dim(0), w = logits.dim(1), c = logits.dim(2);
  if (target.height() != h || target.width() != w) {
    throw ConfigError("target " + std::to_string(target.height()) + "x" + std::to_string(target.width()) +
                      " does not match logits " + shape_string(logits.dims()));
  }
  if (pixel_weights.rank() != 2 || pixel_weights.dim(0) != h || pixel_weights.dim(1) != w) {
    throw ConfigError("pixel weights must be " + std::to_string(h) + "x" + std::to_string(w) + ", got " +
                      shape_string(pixel_weights.dims()));
  }

  const std::size_t pixels = h * w;
  const double inv_pixels = 1.0 / static_cast<double>(pixels);
  Tensor probs({h, w, c});
  Tensor grad({h, w, c});
  std::vector<double> e(c);
  double total = 0.0;

  for (std::size_t p = 0; p < pixels; ++p) {
    const std::int32_t y = target[p];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw InputError("target class " + std::to_string(y) + " out of range [0," + std::to_string(c) + ")");
    }
    const float wt = pixel_weights[p];
    if (!(wt >= 0.0f)) throw InputError("pixel weights must be non-negative");

    const float* z = logits.data() + p * c;
    const double zmax = *std::max_element(z, z + c);
    double sum = 0.0;
    for (std::size_t q = 0; q < c; ++q) {
      e[q] = std::exp(static_cast<double>(z[q]) - zmax);
      sum += e[q];
    }
    const double log_sum = std::log(sum);
    const double ce = log_sum - (static_cast<double>(z[y]) - zmax);
    total += static_cast<double>(wt) * ce;

    const double scale = static_cast<double>(wt) * inv_pixels;
    for (std::size_t q = 0; q < c; ++q) {
      const double pq = e[q] / sum;
      probs[p * c + q] = static_cast<float>(pq);
      const double onehot = static_cast<std::size_t>(y) == q ? 1.0 : 0.0;
      grad[p * c + q] = static_cast<float>((pq - onehot) * scale);
    }
  }

  return {total * inv_pixels, ProbabilityMap(std::move(probs)), std::move(grad)};
}

// ---------------------------------------------------------------------------

NodeId Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  TapeNode n;
  n.op = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Tape::channel_affine(NodeId x, std::span<const float> shift, std::span<const float> scale) {
  const Tensor& in = value(x);
  const std::size_t c = in.dims().back();
  if (shift.size() != c || scale.size() != c) {
    throw ConfigError("channel affine needs " + std::to_string(c) + " shift/scale entries");
  }
  TapeNode n;
  n.op = OpKind::ChannelAffine;
  n.inputs = {x.index};
  n.requires_grad = node(x).requires_grad;
  n.channel_scale.assign(scale.begin(), scale.end());
  n.value = in;
  float* v = n.value.data();
  for (std::size_t k = 0; k < n.value.size(); ++k) v[k] = (v[k] - shift[k % c]) * scale[k % c];
  return push(std::move(n));
}

NodeId Tape::conv2d(NodeId input, NodeId kernel, NodeId bias) {
  TapeNode n;
  n.op = OpKind::Conv2d;
  n.inputs = {input.index, kernel.index, bias.index};
  n.requires_grad = node(input).requires_grad || node(kernel).requires_grad || node(bias).requires_grad;
  n.value = conv2d_forward(value(input), value(kernel), value(bias));
  return push(std::move(n));
}

NodeId Tape::relu(NodeId input) {
  TapeNode n;
  n.op = OpKind::Relu;
  n.inputs = {input.index};
  n.requires_grad = node(input).requires_grad;
  n.value = relu_forward(value(input));
  return push(std::move(n));
}

NodeId Tape::softmax_cross_entropy(NodeId logits, const LabelMap& target, const Tensor& pixel_weights) {
  auto result = autodiff::softmax_cross_entropy(value(logits), target, pixel_weights);
  TapeNode n;
  n.op = OpKind::SoftmaxCrossEntropy;
  n.inputs = {logits.index};
  n.requires_grad = node(logits).requires_grad;
  n.loss = result.loss;
  n.value = Tensor({1}, static_cast<float>(result.loss));
  n.probs = std::move(result.probs);
  n.grad_logits = std::move(result.grad_logits);
  return push(std::move(n));
}

double Tape::loss(NodeId id) const {
  const TapeNode& n = node(id);
  if (n.op != OpKind::SoftmaxCrossEntropy) throw InternalError("loss() requested from a non-loss node");
  return n.loss;
}

const ProbabilityMap& Tape::probs(NodeId id) const {
  const TapeNode& n = node(id);
  if (n.op != OpKind::SoftmaxCrossEntropy) throw InternalError("probs() requested from a non-loss node");
  return n.probs;
}

void Tape::scale_gradient(NodeId id, float factor) { nodes_.at(id.index).grad_scale = factor; }

void Tape::backward(std::initializer_list<NodeId> roots) {
  backward(std::span<const NodeId>(roots.begin(), roots.size()));
}

void Tape::backward(std::span<const NodeId> roots) {
  grads_.assign(nodes_.size(), Tensor());
  auto accumulate = [&](std::size_t idx, Tensor g) {
    Tensor& slot = grads_[idx];
    if (slot.empty()) {
      slot = std::move(g);
      return;
    }
    if (slot.dims() != g.dims()) throw InternalError("adjoint shape mismatch on tape node " + std::to_string(idx));
    float* s = slot.data();
    const float* a = g.data();
    for (std::size_t k = 0; k < slot.size(); ++k) s[k] += a[k];
  };

  for (NodeId r : roots) accumulate(r.index, Tensor(value(r).dims(), 1.0f));

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const TapeNode& n = nodes_[idx];
    if (!n.requires_grad || grads_[idx].empty() || n.op == OpKind::Leaf) continue;
    Tensor g = grads_[idx];
    if (n.grad_scale != 1.0f) {
      for (float& v : g.values()) v *= n.grad_scale;
    }

    switch (n.op) {
      case OpKind::ChannelAffine: {
        const std::size_t c = n.channel_scale.size();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] *= n.channel_scale[k % c];
        accumulate(n.inputs[0], std::move(g));
        break;
      }
      case OpKind::Conv2d: {
        const TapeNode& in = nodes_[n.inputs[0]];
        const TapeNode& ker = nodes_[n.inputs[1]];
        const TapeNode& bias = nodes_[n.inputs[2]];
        const bool want_params = ker.requires_grad || bias.requires_grad;
        ConvGrads cg = conv2d_backward(in.value, ker.value, g, in.requires_grad, want_params);
        if (in.requires_grad) accumulate(n.inputs[0], std::move(cg.input));
        if (ker.requires_grad) accumulate(n.inputs[1], std::move(cg.kernel));
        if (bias.requires_grad) accumulate(n.inputs[2], std::move(cg.bias));
        break;
      }
      case OpKind::Relu:
        accumulate(n.inputs[0], relu_backward(nodes_[n.inputs[0]].value, g));
        break;
      case OpKind::SoftmaxCrossEntropy: {
        Tensor gl = n.grad_logits;
        const float seed = g[0];
        if (seed != 1.0f) {
          for (float& v : gl.values()) v *= seed;
        }
        accumulate(n.inputs[0], std::move(gl));
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    if (grads_[idx].empty()) grads_[idx] = Tensor(nodes_[idx].value.dims());
  }
}

const Tensor& Tape::grad(NodeId id) const {
  if (grads_.size() != nodes_.size()) throw InternalError("grad() called before backward()");
  return grads_.at(id.index);
}

}  // namespace segadv::autodiff
