// SPDX-License-Identifier: Apache-2.0

#include "wsa/autograd/var.hpp"

#include <cmath>
#include <unordered_set>

namespace wsa::autograd {

template <class Real>
void Node<Real>::accumulate(const BasicTensor<Real>& g) {
  if (!requires_grad) return;
  if (g.shape() != value.shape()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match value " +
                         shape_string(value.shape()));
  }
  if (grad.empty() && !value.empty()) {
    grad = g;
    return;
  }
  auto dst = grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class Real>
Var<Real> Var<Real>::constant(BasicTensor<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  return Var(std::move(node));
}

template <class Real>
Var<Real> Var<Real>::parameter(BasicTensor<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

template <class Real>
BasicTensor<Real> Var<Real>::grad() const {
  if (node_->grad.empty()) return BasicTensor<Real>(node_->value.shape());
  return node_->grad;
}

template <class Real>
double Var<Real>::item() const {
  if (node_->value.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(node_->value.shape()));
  }
  return std::isnan(node_->exact) ? static_cast<double>(node_->value[0]) : node_->exact;
}

template <class Real>
Var<Real> make_op(BasicTensor<Real> value, const std::vector<Var<Real>>& inputs,
                  typename Node<Real>::BackwardFn backward, double exact) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->exact = exact;
  for (const auto& in : inputs) node->requires_grad |= in.requires_grad();
  if (node->requires_grad) {
    for (const auto& in : inputs) node->parents.push_back(in.share());
    node->backward = std::move(backward);
  }
  return Var<Real>(std::move(node));
}

template <class Real>
void backward(const Var<Real>& root) {
  if (root.value().size() != 1) {
    throw DimensionError("backward() needs a scalar root, got " + shape_string(root.shape()));
  }
  if (!std::isfinite(root.item())) throw NumericError("loss is not finite");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<Real>*> order;
  std::unordered_set<Node<Real>*> seen;
  std::vector<std::pair<Node<Real>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Real>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(BasicTensor<Real>::full(root.shape(), Real(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Real>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(node->grad);
  }
}

template <class Real>
Var<Real> ParamBinder<Real>::operator()(const BasicTensor<Real>& param) {
  auto it = vars_.find(&param);
  if (it != vars_.end()) return it->second;
  Var<Real> v = track_ ? Var<Real>::parameter(param) : Var<Real>::constant(param);
  vars_.emplace(&param, v);
  return v;
}

template <class Real>
BasicTensor<Real> ParamBinder<Real>::grad(const BasicTensor<Real>& param) const {
  auto it = vars_.find(&param);
  if (it == vars_.end()) return BasicTensor<Real>(param.shape());
  return it->second.grad();
}

#define WSA_INSTANTIATE(Real)                                                                \
  template struct Node<Real>;                                                                \
  template class Var<Real>;                                                                  \
  template class ParamBinder<Real>;                                                          \
  template Var<Real> make_op(BasicTensor<Real>, const std::vector<Var<Real>>&,               \
                             typename Node<Real>::BackwardFn, double);                       \
  template void backward(const Var<Real>&);

WSA_INSTANTIATE(float)
WSA_INSTANTIATE(double)

#undef WSA_INSTANTIATE

}  // namespace wsa::autograd
