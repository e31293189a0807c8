#pragma once

// Reverse-mode differentiation over Tensor values.
//
// A Tape records every primitive as a node holding its value, the indices of
// its inputs, a forward closure (for replay) and a backward closure. Backward
// walks the nodes in exact reverse recording order, so gradient accumulation
// is deterministic and training is bit-reproducible.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "amaa/ops.hpp"
#include "amaa/param_store.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

struct Var {
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

class Tape {
 public:
  using ForwardFn = std::function<Tensor(const Tape&)>;
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  /// Leaf bound to a stored parameter; backward() adds its gradient into the
  /// store's accumulator.
  Var param(ParamStore& store, const std::string& name);
  /// Evaluates `fwd` once and records the node.
  Var record(std::vector<Var> inputs, ForwardFn fwd, BackwardFn bwd);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient slot of a node, zero-initialised on first use.
  Tensor& grad_slot(Var v);
  /// Empty tensor when no gradient reached the node.
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  const std::vector<Var>& inputs(std::size_t node) const {
    return nodes_.at(node).inputs;
  }

  /// Reverse pass from a scalar output (seed 1). Throws ContractError when
  /// the output is not a single element.
  void backward(Var output);

  /// Recomputes every recorded node from the current leaf values.
  void replay();

  /// Appends one byte per element describing which smooth piece of a
  /// piecewise-defined primitive is active (e.g. the sign of a ReLU input).
  using RegimeFn = std::function<void(const Tape&, std::vector<std::uint8_t>&)>;
  /// Registers a regime probe for a non-smooth node.
  void mark_nonsmooth(Var node, RegimeFn fn);
  /// Concatenated regimes of every non-smooth node at the current values.
  /// Two evaluations with equal signatures lie on the same smooth piece.
  std::vector<std::uint8_t> regime_signature() const;
  /// Mutable access to a leaf (constant or parameter) value, for replays.
  Tensor& leaf_value(Var v);
  std::vector<Var> param_leaves(const std::string& name) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> inputs;
    ForwardFn forward;
    BackwardFn backward;
    RegimeFn regime;
    Param* param = nullptr;
    std::string param_name;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

/// Differentiable primitives. Every function mirrors an amaa::ops kernel.
namespace ad {

Var add(Tape& t, Var a, Var b);  // b may broadcast (see ops::Broadcast)
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double k);
Var add_scalar(Tape& t, Var a, double k);
/// a * s for a learnable scalar s of shape (1).
Var scale_by(Tape& t, Var a, Var s);

Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var reciprocal(Tape& t, Var x, double floor);

Var conv3d(Tape& t, Var x, Var kernel, Var bias, std::size_t stride);
Var conv2d(Tape& t, Var x, Var kernel, Var bias, std::size_t stride);
Var global_avg_pool3d(Tape& t, Var x);
Var matvec(Tape& t, Var m, Var x);
Var box_mean(Tape& t, Var x, std::size_t window);
Var channel_mean(Tape& t, Var x);
Var concat_channels(Tape& t, Var a, Var b);
Var upsample2(Tape& t, Var x, ops::UpsampleMode mode);
Var softmax_channels(Tape& t, Var logits);
Var sum(Tape& t, Var x);
/// Mean over all entries, shape (1).
Var mean(Tape& t, Var x);

}  // namespace ad
}  // namespace amaa
