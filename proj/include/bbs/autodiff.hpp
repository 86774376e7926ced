#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bbs/tensor.hpp"

namespace bbs::ad {

// Eager reverse-mode autodiff. Each op returns a new node holding its value
// and a closure that scatters the node's gradient into its parents. Graphs
// are kept alive through shared parent links only while gradients are
// enabled, so inference frees intermediates as soon as handles drop.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; empty means zero
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  Tensor& ensure_grad();
  void add_grad(const Tensor& g);
};

bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

Var constant(Tensor v);            // never receives gradient
Var leaf(Tensor v);                // trainable parameter node
void backward(const Var& scalar_root);

// Op-construction helper shared by the op translation units. Parent links and
// the closure are kept only when gradients are enabled and some parent is
// trainable.
Var make_op_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

// ---- pointwise / reduction ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var sum_all(const Var& a);         // -> shape {1}
Var mean_all(const Var& a);        // -> shape {1}
Var dot_const(const Var& a, const Tensor& w);  // sum(a * w) -> {1}

// Mean binary cross-entropy of a probability map against a {0,1} target,
// with the probability clamped to [eps, 1-eps].
Var bce_mean(const Var& prob, const Tensor& target, double eps);

// ---- shape / broadcast ----
Var concat_channels(const std::vector<Var>& xs);            // CHW along C
Var mul_channel_gate(const Var& x, const Var& gate);        // gate {C}
Var add_channel_bias(const Var& x, const Var& bias);        // bias {C}
Var mul_spatial_gate(const Var& x, const Var& gate);        // gate {1,H,W}
Var broadcast_rows(const Var& row, int64_t channels);       // {1,H,W} -> {C,H,W}

// ---- dense ----
Var linear(const Var& x, const Var& w, const Var& b);       // x {C}, w {O,C}, b {O}

// ---- spatial (conv.cpp) ----
struct ConvSpec {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};
Var conv2d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec);
// w layout {Cin, Cout, kh, kw}; output side = in*stride for kernel==stride, pad 0.
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int kernel, int stride);
Var max_pool2d(const Var& x, int kernel, int stride, int pad);
Var global_max_channels(const Var& x);   // {C,H,W} -> {C}
Var max_over_channels(const Var& x);     // {C,H,W} -> {1,H,W}
Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w);
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps);

}  // namespace bbs::ad
