#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "segadv/tensor.hpp"

// Reverse-mode differentiation over the handful of operators the reference
// segmentation network needs: per-channel affine input normalization, same-size
// 2-D convolution, ReLU and weighted per-pixel softmax cross-entropy.
namespace segadv::autodiff {

// ---------------------------------------------------------------------------
// Stateless kernels. The tape below is built on top of these; tests and the
// benchmarks call them directly.

/// out[i,j,o] = bias[o] + sum_{u,v,c} input[i+u-k/2, j+v-k/2, c] * kernel[u,v,c,o],
/// out-of-range input reads as zero.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);

struct ConvGrads {
  Tensor input;   // empty unless requested
  Tensor kernel;  // empty unless requested
  Tensor bias;    // empty unless requested
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, bool want_input,
                          bool want_params);

Tensor relu_forward(const Tensor& input);
/// Masks grad_out where input <= 0 (the subgradient at exactly zero is zero).
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

struct SoftmaxCrossEntropy {
  double loss = 0.0;
  ProbabilityMap probs;
  Tensor grad_logits;
};

/// loss = (1/|I|) * sum_ij w_ij * CE(softmax(logits_ij), target_ij).
/// grad_logits is the exact adjoint: (softmax - onehot) * w_ij / |I|.
SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, const LabelMap& target, const Tensor& pixel_weights);

// ---------------------------------------------------------------------------

enum class OpKind { Leaf, ChannelAffine, Conv2d, Relu, SoftmaxCrossEntropy };

struct NodeId {
  std::size_t index = 0;
};

struct TapeNode {
  OpKind op = OpKind::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad = false;
  float grad_scale = 1.0f;

  // Op-specific state kept for the backward pass.
  std::vector<float> channel_scale;
  Tensor grad_logits;
  ProbabilityMap probs;
  double loss = 0.0;
};

/// Records operations in creation order; backward() walks them in reverse.
/// A tape is single-use per forward pass and is not shared across threads.
class Tape {
 public:
  NodeId leaf(Tensor value, bool requires_grad);

  /// y[..., c] = (x[..., c] - shift[c]) * scale[c] over the last axis.
  NodeId channel_affine(NodeId x, std::span<const float> shift, std::span<const float> scale);
  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias);
  NodeId relu(NodeId input);
  /// Scalar loss node; its probabilities are available through probs().
  NodeId softmax_cross_entropy(NodeId logits, const LabelMap& target, const Tensor& pixel_weights);

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  const TapeNode& node(NodeId id) const { return nodes_.at(id.index); }
  double loss(NodeId id) const;
  const ProbabilityMap& probs(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Multiplies the adjoint that `id` propagates to its inputs. Only used to
  /// inject faults when exercising the gradient checker.
  void scale_gradient(NodeId id, float factor);

  /// Seeds every root with d(root)/d(root) = 1 and accumulates adjoints into
  /// all nodes that require gradients. Replaces any previous backward result.
  void backward(std::initializer_list<NodeId> roots);
  void backward(std::span<const NodeId> roots);

  /// Adjoint of a node after backward(); zero tensor if nothing flowed into it.
  const Tensor& grad(NodeId id) const;

 private:
  NodeId push(TapeNode node);

  std::vector<TapeNode> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace segadv::autodiff
