// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

#include "wsa/core/tensor.hpp"

namespace wsa::autograd {

template <class Real>
struct Node {
  using BackwardFn = std::function<void(const BasicTensor<Real>& grad_out)>;

  BasicTensor<Real> value;
  BasicTensor<Real> grad;  // allocated on first accumulation
  // Scalar reductions also keep their double-precision result here, so loss
  // values are not rounded to the working precision (finite differences on
  // f32 graphs depend on it). NaN when not available.
  double exact = std::numeric_limits<double>::quiet_NaN();
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  void accumulate(const BasicTensor<Real>& g);
};

// Handle to a graph node. Graphs are built eagerly by the ops in ops.hpp and
// only record parents/backward closures when some input requires a gradient,
// so inference through the same code path carries no tape.
template <class Real>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

  static Var constant(BasicTensor<Real> value);
  static Var parameter(BasicTensor<Real> value);

  const BasicTensor<Real>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  // Gradient after backward(); zeros if the node was not reached.
  BasicTensor<Real> grad() const;

  // Value of a one-element node, in double precision when the op provided it.
  double item() const;

  Node<Real>* node() const { return node_.get(); }
  const std::shared_ptr<Node<Real>>& share() const { return node_; }

 private:
  std::shared_ptr<Node<Real>> node_;
};

// Result node of an op. The backward closure receives d(loss)/d(result) and
// accumulates into the inputs (via Node::accumulate on inputs that require
// grad); it is dropped when no input requires grad.
template <class Real>
Var<Real> make_op(BasicTensor<Real> value, const std::vector<Var<Real>>& inputs,
                  typename Node<Real>::BackwardFn backward,
                  double exact = std::numeric_limits<double>::quiet_NaN());

// Reverse pass from a one-element root. Throws NumericError if the root is not
// finite and DimensionError if it is not a scalar.
template <class Real>
void backward(const Var<Real>& root);

// Maps model parameter tensors onto graph leaves. With tracking on, each
// tensor becomes (once) a parameter leaf whose gradient can be read back after
// backward(); with tracking off the same code path builds constants only.
template <class Real>
class ParamBinder {
 public:
  explicit ParamBinder(bool track) : track_(track) {}

  Var<Real> operator()(const BasicTensor<Real>& param);
  BasicTensor<Real> grad(const BasicTensor<Real>& param) const;
  bool tracking() const { return track_; }

 private:
  bool track_;
  std::unordered_map<const BasicTensor<Real>*, Var<Real>> vars_;
};

}  // namespace wsa::autograd
