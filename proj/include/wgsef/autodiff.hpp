#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wgsef/tensor.hpp"

namespace wgsef {

class Tape;

/// Handle to a node on a tape.
struct Var {
  std::size_t id = 0;
};

/// Records primitive operations in creation order; backward() replays them in
/// reverse. A tape is single-owner and meant to be discarded after one step.
class Tape {
 public:
  /// A leaf node. Gradients are only accumulated for leaves that ask for them
  /// and for nodes that depend on such leaves.
  Var leaf(Tensor value, bool requires_grad = false);

  [[nodiscard]] const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() loss w.r.t. v; zeros if v was not reached.
  [[nodiscard]] const Tensor& grad(Var v);
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d loss / d loss = 1 and propagates. Throws NonScalarLoss unless the
  /// loss holds exactly one value.
  void backward(Var loss);

  // Used by primitives.
  Var push(Tensor value, std::vector<Var> inputs, std::function<void(Tape&, std::size_t)> back);
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> back;
  };
  std::vector<Node> nodes_;
};

/// a[M,K] * b[K,N], or a[M,K] * b[N,K]^T when transpose_b.
Var matmul(Tape& tape, Var a, Var b, bool transpose_b = false);

/// x[B,C,H,W] with filters w[O,C,kh,kw]; zero padding on all sides.
Var conv2d(Tape& tape, Var x, Var w, std::size_t stride = 1, std::size_t pad = 0);

/// Non-overlapping or strided max over size x size windows. Ties go to the
/// first element in row-major window order.
Var max_pool2d(Tape& tape, Var x, std::size_t size = 2, std::size_t stride = 2);

/// max(x, 0); the derivative at 0 is taken as 0.
Var relu(Tape& tape, Var x);

/// Adds bias[C] along dimension 1 of x[B,C,...].
Var add_bias(Tape& tape, Var x, Var bias);

/// x[B,...] -> x[B, rest]
Var flatten(Tape& tape, Var x);

Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double c);

/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Tape& tape, Var logits, const std::vector<int>& labels);

/// Mean over rows of 0.5 * ||pred_i - target_i||^2.
Var mse(Tape& tape, Var pred, const Tensor& target);

}  // namespace wgsef
