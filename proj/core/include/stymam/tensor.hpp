#pragma once

// Dense row-major tensors with a recorded reverse-mode tape.
//
// A Tensor is a cheap handle onto an immutable node. Operations that see at
// least one grad-tracked input record their inputs and a backward closure on
// the result node, so the graph is whatever is reachable from the output.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stymam {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<Real>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const Real> data() const { return node_->value; }
  Real operator[](std::size_t i) const { return node_->value[i]; }
  Real item() const;

  // In-place access for optimizers and test perturbation; only valid on leaves.
  std::span<Real> mutable_data();

  bool requires_grad() const { return node_->requires_grad; }
  // Empty span when no gradient has reached this tensor.
  std::span<const Real> grad() const { return node_->grad; }
  void zero_grad();

  // Same values, no history, not tracked.
  Tensor detach() const;
  // Deep copy as a fresh leaf.
  Tensor clone(bool requires_grad) const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Nodes reachable from an output, in topological order (inputs first).
// Only nodes that participate in differentiation are recorded.
class Graph {
 public:
  static Graph trace(const Tensor& output);
  const std::vector<Node*>& nodes() const { return nodes_; }

 private:
  std::vector<Node*> nodes_;
};

// Seeds d(output)/d(output) = 1 and propagates to every tracked leaf.
// Gradients accumulate; call zero_grad on parameters between steps.
void backward(const Tensor& scalar_output);

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds the result node. If any input is tracked and recording is on, the
// node keeps its inputs and backward closure.
Tensor make_result(const char* op, Shape shape, std::vector<Real> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);

}  // namespace stymam
