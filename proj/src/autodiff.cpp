#include "bbs/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace bbs::ad {

namespace {
thread_local bool g_grad_enabled = true;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->value.shape) + " vs " + shape_str(b->value.shape));
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

Tensor& Node::ensure_grad() {
  if (grad.data.empty()) grad = Tensor::zeros(value.shape);
  return grad;
}

void Node::add_grad(const Tensor& g) {
  Tensor& acc = ensure_grad();
  for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Var leaf(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

Var make_op_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool need = false;
  if (g_grad_enabled)
    for (const Var& p : parents)
      if (p->requires_grad) need = true;
  if (need) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

void backward(const Var& scalar_root) {
  if (scalar_root->value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar, got " + shape_str(scalar_root->value.shape));
  if (!scalar_root->requires_grad) return;

  // Iterative post-order DFS; reverse post-order is a valid topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({scalar_root.get(), 0});
  seen.insert(scalar_root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  scalar_root->ensure_grad();
  scalar_root->grad.data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.data.empty()) n->backprop(*n);
  }
}

// ---- pointwise ----

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_op_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->add_grad(n.grad);
    if (b->requires_grad) b->add_grad(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  return make_op_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->add_grad(n.grad);
    if (b->requires_grad) {
      Tensor& acc = b->ensure_grad();
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] -= n.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return make_op_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& acc = a->ensure_grad();
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += n.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      Tensor& acc = b->ensure_grad();
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += n.grad.data[i] * a->value.data[i];
    }
  });
}

Var scale(const Var& a, double k) {
  Tensor out = a->value;
  for (double& x : out.data) x *= k;
  return make_op_node(std::move(out), {a}, [a, k](Node& n) {
    Tensor& acc = a->ensure_grad();
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += n.grad.data[i] * k;
  });
}

Var add_scalar(const Var& a, double k) {
  Tensor out = a->value;
  for (double& x : out.data) x += k;
  return make_op_node(std::move(out), {a}, [a](Node& n) { a->add_grad(n.grad); });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return make_op_node(std::move(out), {a}, [a](Node& n) {
    Tensor& acc = a->ensure_grad();
    for (size_t i = 0; i < acc.data.size(); ++i)
      if (a->value.data[i] > 0.0) acc.data[i] += n.grad.data[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  return make_op_node(std::move(out), {a}, [a](Node& nd) {
    Tensor& acc = a->ensure_grad();
    for (size_t i = 0; i < acc.data.size(); ++i) {
      double s = nd.value.data[i];
      acc.data[i] += nd.grad.data[i] * s * (1.0 - s);
    }
  });
}

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(a->value.sum());
  return make_op_node(std::move(out), {a}, [a](Node& n) {
    Tensor& acc = a->ensure_grad();
    double g = n.grad.data[0];
    for (double& x : acc.data) x += g;
  });
}

Var mean_all(const Var& a) {
  double inv = 1.0 / static_cast<double>(a->value.numel());
  Tensor out = Tensor::scalar(a->value.sum() * inv);
  return make_op_node(std::move(out), {a}, [a, inv](Node& n) {
    Tensor& acc = a->ensure_grad();
    double g = n.grad.data[0] * inv;
    for (double& x : acc.data) x += g;
  });
}

Var dot_const(const Var& a, const Tensor& w) {
  if (!a->value.same_shape(w))
    throw std::invalid_argument("dot_const: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < w.data.size(); ++i) s += a->value.data[i] * w.data[i];
  Tensor ww = w;
  return make_op_node(Tensor::scalar(s), {a}, [a, ww](Node& n) {
    Tensor& acc = a->ensure_grad();
    double g = n.grad.data[0];
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g * ww.data[i];
  });
}

Var bce_mean(const Var& prob, const Tensor& target, double eps) {
  if (!prob->value.same_shape(target))
    throw std::invalid_argument("bce_mean: prediction/target shape mismatch " + shape_str(prob->value.shape) + " vs " + shape_str(target.shape));
  size_t n = prob->value.data.size();
  double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double s = std::clamp(prob->value.data[i], eps, 1.0 - eps);
    double g = target.data[i];
    loss -= g * std::log(s) + (1.0 - g) * std::log(1.0 - s);
  }
  Tensor tgt = target;
  return make_op_node(Tensor::scalar(loss * inv), {prob}, [prob, tgt, eps, inv](Node& nd) {
    Tensor& acc = prob->ensure_grad();
    double g0 = nd.grad.data[0] * inv;
    for (size_t i = 0; i < acc.data.size(); ++i) {
      double raw = prob->value.data[i];
      if (raw <= eps || raw >= 1.0 - eps) continue;  // clamp is flat outside the band
      double g = tgt.data[i];
      acc.data[i] += g0 * (-g / raw + (1.0 - g) / (1.0 - raw));
    }
  });
}

// ---- shape / broadcast ----

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  int64_t h = xs[0]->value.dim(1), w = xs[0]->value.dim(2);
  int64_t ctot = 0;
  for (const Var& x : xs) {
    if (x->value.rank() != 3 || x->value.dim(1) != h || x->value.dim(2) != w)
      throw std::invalid_argument("concat_channels: spatial mismatch");
    ctot += x->value.dim(0);
  }
  Tensor out({ctot, h, w});
  size_t off = 0;
  for (const Var& x : xs) {
    std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += x->value.data.size();
  }
  return make_op_node(std::move(out), xs, [xs](Node& n) {
    size_t off = 0;
    for (const Var& x : xs) {
      size_t cnt = x->value.data.size();
      if (x->requires_grad) {
        Tensor& acc = x->ensure_grad();
        for (size_t i = 0; i < cnt; ++i) acc.data[i] += n.grad.data[off + i];
      }
      off += cnt;
    }
  });
}

Var mul_channel_gate(const Var& x, const Var& gate) {
  if (x->value.rank() != 3 || gate->value.rank() != 1 || gate->value.dim(0) != x->value.dim(0))
    throw std::invalid_argument("mul_channel_gate: want x {C,H,W}, gate {C}");
  int64_t c = x->value.dim(0);
  int64_t hw = x->value.dim(1) * x->value.dim(2);
  Tensor out = x->value;
  for (int64_t ch = 0; ch < c; ++ch) {
    double g = gate->value.data[static_cast<size_t>(ch)];
    for (int64_t i = 0; i < hw; ++i) out.data[static_cast<size_t>(ch * hw + i)] *= g;
  }
  return make_op_node(std::move(out), {x, gate}, [x, gate, c, hw](Node& n) {
    if (x->requires_grad) {
      Tensor& acc = x->ensure_grad();
      for (int64_t ch = 0; ch < c; ++ch) {
        double g = gate->value.data[static_cast<size_t>(ch)];
        for (int64_t i = 0; i < hw; ++i) acc.data[static_cast<size_t>(ch * hw + i)] += n.grad.data[static_cast<size_t>(ch * hw + i)] * g;
      }
    }
    if (gate->requires_grad) {
      Tensor& acc = gate->ensure_grad();
      for (int64_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += n.grad.data[static_cast<size_t>(ch * hw + i)] * x->value.data[static_cast<size_t>(ch * hw + i)];
        acc.data[static_cast<size_t>(ch)] += s;
      }
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  if (x->value.rank() != 3 || bias->value.rank() != 1 || bias->value.dim(0) != x->value.dim(0))
    throw std::invalid_argument("add_channel_bias: want x {C,H,W}, bias {C}");
  int64_t c = x->value.dim(0);
  int64_t hw = x->value.dim(1) * x->value.dim(2);
  Tensor out = x->value;
  for (int64_t ch = 0; ch < c; ++ch) {
    double bv = bias->value.data[static_cast<size_t>(ch)];
    for (int64_t i = 0; i < hw; ++i) out.data[static_cast<size_t>(ch * hw + i)] += bv;
  }
  return make_op_node(std::move(out), {x, bias}, [x, bias, c, hw](Node& n) {
    if (x->requires_grad) x->add_grad(n.grad);
    if (bias->requires_grad) {
      Tensor& acc = bias->ensure_grad();
      for (int64_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += n.grad.data[static_cast<size_t>(ch * hw + i)];
        acc.data[static_cast<size_t>(ch)] += s;
      }
    }
  });
}

Var mul_spatial_gate(const Var& x, const Var& gate) {
  if (x->value.rank() != 3 || gate->value.rank() != 3 || gate->value.dim(0) != 1 ||
      gate->value.dim(1) != x->value.dim(1) || gate->value.dim(2) != x->value.dim(2))
    throw std::invalid_argument("mul_spatial_gate: want x {C,H,W}, gate {1,H,W}");
  int64_t c = x->value.dim(0);
  int64_t hw = x->value.dim(1) * x->value.dim(2);
  Tensor out = x->value;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < hw; ++i) out.data[static_cast<size_t>(ch * hw + i)] *= gate->value.data[static_cast<size_t>(i)];
  return make_op_node(std::move(out), {x, gate}, [x, gate, c, hw](Node& n) {
    if (x->requires_grad) {
      Tensor& acc = x->ensure_grad();
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < hw; ++i)
          acc.data[static_cast<size_t>(ch * hw + i)] += n.grad.data[static_cast<size_t>(ch * hw + i)] * gate->value.data[static_cast<size_t>(i)];
    }
    if (gate->requires_grad) {
      Tensor& acc = gate->ensure_grad();
      for (int64_t i = 0; i < hw; ++i) {
        double s = 0.0;
        for (int64_t ch = 0; ch < c; ++ch) s += n.grad.data[static_cast<size_t>(ch * hw + i)] * x->value.data[static_cast<size_t>(ch * hw + i)];
        acc.data[static_cast<size_t>(i)] += s;
      }
    }
  });
}

Var broadcast_rows(const Var& row, int64_t channels) {
  if (row->value.rank() != 3 || row->value.dim(0) != 1)
    throw std::invalid_argument("broadcast_rows: want {1,H,W}");
  int64_t hw = row->value.dim(1) * row->value.dim(2);
  Tensor out({channels, row->value.dim(1), row->value.dim(2)});
  for (int64_t ch = 0; ch < channels; ++ch)
    std::copy(row->value.data.begin(), row->value.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(ch * hw));
  return make_op_node(std::move(out), {row}, [row, channels, hw](Node& n) {
    Tensor& acc = row->ensure_grad();
    for (int64_t ch = 0; ch < channels; ++ch)
      for (int64_t i = 0; i < hw; ++i) acc.data[static_cast<size_t>(i)] += n.grad.data[static_cast<size_t>(ch * hw + i)];
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x->value.rank() != 1 || w->value.rank() != 2 || w->value.dim(1) != x->value.dim(0))
    throw std::invalid_argument("linear: want x {C}, w {O,C}");
  int64_t o = w->value.dim(0), c = w->value.dim(1);
  Tensor out({o});
  for (int64_t i = 0; i < o; ++i) {
    double s = b->value.data[static_cast<size_t>(i)];
    for (int64_t j = 0; j < c; ++j) s += w->value.data[static_cast<size_t>(i * c + j)] * x->value.data[static_cast<size_t>(j)];
    out.data[static_cast<size_t>(i)] = s;
  }
  return make_op_node(std::move(out), {x, w, b}, [x, w, b, o, c](Node& n) {
    if (x->requires_grad) {
      Tensor& acc = x->ensure_grad();
      for (int64_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (int64_t i = 0; i < o; ++i) s += n.grad.data[static_cast<size_t>(i)] * w->value.data[static_cast<size_t>(i * c + j)];
        acc.data[static_cast<size_t>(j)] += s;
      }
    }
    if (w->requires_grad) {
      Tensor& acc = w->ensure_grad();
      for (int64_t i = 0; i < o; ++i)
        for (int64_t j = 0; j < c; ++j) acc.data[static_cast<size_t>(i * c + j)] += n.grad.data[static_cast<size_t>(i)] * x->value.data[static_cast<size_t>(j)];
    }
    if (b->requires_grad) b->add_grad(n.grad);
  });
}

}  // namespace bbs::ad
