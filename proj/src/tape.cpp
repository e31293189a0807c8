#include "amaa/tape.hpp"

#include <cmath>

namespace amaa {

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Param& p = store.at(name);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.param_name = name;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::record(std::vector<Var> inputs, ForwardFn fwd, BackwardFn bwd) {
  Node n;
  n.value = fwd(*this);
  for (Var in : inputs) n.needs_grad = n.needs_grad || nodes_.at(in.id).needs_grad;
  n.inputs = std::move(inputs);
  n.forward = std::move(fwd);
  n.backward = std::move(bwd);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Tensor& Tape::grad_slot(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var output) {
  if (!output.valid() || value(output).size() != 1) {
    throw ContractError("backward() requires a scalar output, got shape " +
                        (output.valid() ? to_string(value(output).shape())
                                        : std::string("<none>")));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(output)[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    double* dst = n.param->grad.data();
    const double* src = n.grad.data();
    for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
  }
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.forward) n.value = n.forward(*this);
  }
}

void Tape::mark_nonsmooth(Var node, RegimeFn fn) { nodes_.at(node.id).regime = std::move(fn); }

std::vector<std::uint8_t> Tape::regime_signature() const {
  std::vector<std::uint8_t> sig;
  for (const Node& n : nodes_) {
    if (n.regime) n.regime(*this, sig);
  }
  return sig;
}

Tensor& Tape::leaf_value(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.forward) throw ContractError("leaf_value() on a non-leaf node");
  return n.value;
}

std::vector<Var> Tape::param_leaves(const std::string& name) const {
  std::vector<Var> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].param && nodes_[i].param_name == name) out.push_back({i});
  }
  return out;
}

namespace ad {
namespace {

// Adds `g` into the gradient slot of `v` when v participates in gradients.
void accumulate(Tape& t, Var v, const Tensor& g) {
  if (!t.needs_grad(v)) return;
  Tensor& slot = t.grad_slot(v);
  double* d = slot.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) d[i] += s[i];
}

const Tensor& out_grad(Tape& t, std::size_t self) { return t.grad_slot({self}); }

}  // namespace

Var add(Tape& t, Var a, Var b) {
  return t.record(
      {a, b},
      [a, b](const Tape& tp) { return ops::add(tp.value(a), tp.value(b)); },
      [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        accumulate(tp, a, g);
        if (tp.needs_grad(b)) {
          const auto mode = ops::classify_broadcast(tp.value(a), tp.value(b));
          accumulate(tp, b, ops::reduce_to(g, tp.value(b), mode));
        }
      });
}

Var sub(Tape& t, Var a, Var b) {
  return t.record(
      {a, b},
      [a, b](const Tape& tp) { return ops::sub(tp.value(a), tp.value(b)); },
      [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        accumulate(tp, a, g);
        if (tp.needs_grad(b)) {
          const auto mode = ops::classify_broadcast(tp.value(a), tp.value(b));
          accumulate(tp, b, ops::scale(ops::reduce_to(g, tp.value(b), mode), -1.0));
        }
      });
}

Var mul(Tape& t, Var a, Var b) {
  return t.record(
      {a, b},
      [a, b](const Tape& tp) { return ops::mul(tp.value(a), tp.value(b)); },
      [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        if (tp.needs_grad(a)) accumulate(tp, a, ops::mul(g, tp.value(b)));
        if (tp.needs_grad(b)) {
          const auto mode = ops::classify_broadcast(tp.value(a), tp.value(b));
          Tensor ga = g;
          const Tensor& av = tp.value(a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= av[i];
          accumulate(tp, b, ops::reduce_to(ga, tp.value(b), mode));
        }
      });
}

Var scale(Tape& t, Var a, double k) {
  return t.record(
      {a}, [a, k](const Tape& tp) { return ops::scale(tp.value(a), k); },
      [a, k](Tape& tp, std::size_t self) {
        accumulate(tp, a, ops::scale(out_grad(tp, self), k));
      });
}

Var add_scalar(Tape& t, Var a, double k) {
  return t.record(
      {a},
      [a, k](const Tape& tp) {
        Tensor out = tp.value(a);
        for (double& v : out.values()) v += k;
        return out;
      },
      [a](Tape& tp, std::size_t self) { accumulate(tp, a, out_grad(tp, self)); });
}

Var scale_by(Tape& t, Var a, Var s) {
  if (t.value(s).size() != 1) {
    throw ShapeError("scale_by expects a scalar factor, got " +
                     to_string(t.value(s).shape()));
  }
  return t.record(
      {a, s},
      [a, s](const Tape& tp) { return ops::scale(tp.value(a), tp.value(s)[0]); },
      [a, s](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        accumulate(tp, a, ops::scale(g, tp.value(s)[0]));
        if (tp.needs_grad(s)) {
          const Tensor& av = tp.value(a);
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
          accumulate(tp, s, Tensor::scalar(acc));
        }
      });
}

Var relu(Tape& t, Var x) {
  const Var out = t.record(
      {x}, [x](const Tape& tp) { return ops::relu(tp.value(x)); },
      [x](Tape& tp, std::size_t self) {
        Tensor g = out_grad(tp, self);
        const Tensor& xv = tp.value(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!(xv[i] > 0.0)) g[i] = 0.0;
        }
        accumulate(tp, x, g);
      });
  t.mark_nonsmooth(out, [x](const Tape& tp, std::vector<std::uint8_t>& sig) {
    for (double v : tp.value(x).values()) sig.push_back(v > 0.0);
  });
  return out;
}

Var sigmoid(Tape& t, Var x) {
  return t.record(
      {x}, [x](const Tape& tp) { return ops::sigmoid(tp.value(x)); },
      [x](Tape& tp, std::size_t self) {
        Tensor g = out_grad(tp, self);
        const Tensor& y = tp.value({self});
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
        accumulate(tp, x, g);
      });
}

Var reciprocal(Tape& t, Var x, double floor) {
  const Var out = t.record(
      {x}, [x, floor](const Tape& tp) { return ops::reciprocal(tp.value(x), floor); },
      [x, floor](Tape& tp, std::size_t self) {
        Tensor g = out_grad(tp, self);
        const Tensor& xv = tp.value(x);
        const Tensor& y = tp.value({self});
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] = xv[i] > floor ? -g[i] * y[i] * y[i] : 0.0;
        }
        accumulate(tp, x, g);
      });
  t.mark_nonsmooth(out, [x, floor](const Tape& tp, std::vector<std::uint8_t>& sig) {
    for (double v : tp.value(x).values()) sig.push_back(v > floor);
  });
  return out;
}

Var conv3d(Tape& t, Var x, Var kernel, Var bias, std::size_t stride) {
  return t.record(
      {x, kernel, bias},
      [=](const Tape& tp) {
        return ops::conv3d(tp.value(x), tp.value(kernel), tp.value(bias), stride);
      },
      [=](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        Tensor* gx = tp.needs_grad(x) ? &tp.grad_slot(x) : nullptr;
        Tensor* gk = tp.needs_grad(kernel) ? &tp.grad_slot(kernel) : nullptr;
        Tensor* gb = tp.needs_grad(bias) ? &tp.grad_slot(bias) : nullptr;
        ops::conv3d_backward(tp.value(x), tp.value(kernel), stride, g, gx, gk, gb);
      });
}

Var conv2d(Tape& t, Var x, Var kernel, Var bias, std::size_t stride) {
  return t.record(
      {x, kernel, bias},
      [=](const Tape& tp) {
        return ops::conv2d(tp.value(x), tp.value(kernel), tp.value(bias), stride);
      },
      [=](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        Tensor* gx = tp.needs_grad(x) ? &tp.grad_slot(x) : nullptr;
        Tensor* gk = tp.needs_grad(kernel) ? &tp.grad_slot(kernel) : nullptr;
        Tensor* gb = tp.needs_grad(bias) ? &tp.grad_slot(bias) : nullptr;
        ops::conv2d_backward(tp.value(x), tp.value(kernel), stride, g, gx, gk, gb);
      });
}

Var global_avg_pool3d(Tape& t, Var x) {
  return t.record(
      {x}, [x](const Tape& tp) { return ops::global_avg_pool3d(tp.value(x)); },
      [x](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        const Tensor& xv = tp.value(x);
        const std::size_t n = xv.voxels();
        Tensor gx(xv.shape());
        for (std::size_t c = 0; c < xv.channels(); ++c) {
          const double v = g[c] / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) gx[c * n + i] = v;
        }
        accumulate(tp, x, gx);
      });
}

Var matvec(Tape& t, Var m, Var x) {
  return t.record(
      {m, x}, [m, x](const Tape& tp) { return ops::matvec(tp.value(m), tp.value(x)); },
      [m, x](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        const Tensor& mv = tp.value(m);
        const Tensor& xv = tp.value(x);
        const std::size_t rows = mv.dim(0), cols = mv.dim(1);
        if (tp.needs_grad(m)) {
          Tensor gm(mv.shape());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] = g[r] * xv[c];
          accumulate(tp, m, gm);
        }
        if (tp.needs_grad(x)) {
          Tensor gx(xv.shape());
          for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += mv[r * cols + c] * g[r];
            gx[c] = acc;
          }
          accumulate(tp, x, gx);
        }
      });
}

Var box_mean(Tape& t, Var x, std::size_t window) {
  return t.record(
      {x}, [x, window](const Tape& tp) { return ops::box_mean(tp.value(x), window); },
      [x, window](Tape& tp, std::size_t self) {
        accumulate(tp, x, ops::box_mean_backward(out_grad(tp, self), window));
      });
}

Var channel_mean(Tape& t, Var x) {
  return t.record(
      {x}, [x](const Tape& tp) { return ops::channel_mean(tp.value(x)); },
      [x](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        const Tensor& xv = tp.value(x);
        const std::size_t n = xv.voxels();
        const double inv = 1.0 / static_cast<double>(xv.channels());
        Tensor gx(xv.shape());
        for (std::size_t c = 0; c < xv.channels(); ++c)
          for (std::size_t i = 0; i < n; ++i) gx[c * n + i] = g[i] * inv;
        accumulate(tp, x, gx);
      });
}

Var concat_channels(Tape& t, Var a, Var b) {
  return t.record(
      {a, b},
      [a, b](const Tape& tp) { return ops::concat_channels(tp.value(a), tp.value(b)); },
      [a, b](Tape& tp, std::size_t self) {
        auto parts = ops::split_channels(out_grad(tp, self), tp.value(a).channels());
        accumulate(tp, a, parts.first);
        accumulate(tp, b, parts.second);
      });
}

Var upsample2(Tape& t, Var x, ops::UpsampleMode mode) {
  return t.record(
      {x}, [x, mode](const Tape& tp) { return ops::upsample2(tp.value(x), mode); },
      [x, mode](Tape& tp, std::size_t self) {
        accumulate(tp, x,
                   ops::upsample2_backward(out_grad(tp, self),
                                           spatial_dims(tp.value(x)), mode));
      });
}

Var softmax_channels(Tape& t, Var logits) {
  return t.record(
      {logits},
      [logits](const Tape& tp) { return ops::softmax_channels(tp.value(logits)); },
      [logits](Tape& tp, std::size_t self) {
        const Tensor& g = out_grad(tp, self);
        const Tensor& p = tp.value({self});
        const std::size_t cn = p.channels();
        const std::size_t n = p.voxels();
        Tensor gx(p.shape());
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cn; ++c) dot += g[c * n + i] * p[c * n + i];
          for (std::size_t c = 0; c < cn; ++c) {
            gx[c * n + i] = p[c * n + i] * (g[c * n + i] - dot);
          }
        }
        accumulate(tp, logits, gx);
      });
}

Var sum(Tape& t, Var x) {
  return t.record(
      {x},
      [x](const Tape& tp) {
        double acc = 0.0;
        for (double v : tp.value(x).values()) acc += v;
        return Tensor::scalar(acc);
      },
      [x](Tape& tp, std::size_t self) {
        accumulate(tp, x, Tensor(tp.value(x).shape(), out_grad(tp, self)[0]));
      });
}

Var mean(Tape& t, Var x) {
  const double inv = 1.0 / static_cast<double>(t.value(x).size());
  return scale(t, sum(t, x), inv);
}

}  // namespace ad
}  // namespace amaa
