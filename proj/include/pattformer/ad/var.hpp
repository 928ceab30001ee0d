#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pattformer/ad/tensor.hpp"

namespace pattformer::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads (additively).
  std::function<void(const Node& self)> backward;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();  // allocates a zero grad of the value's shape
};

/// Handle to a value in the differentiation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad = Tensor(); }

  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds a result node. The backward rule is kept only when at least one
/// parent requires a gradient and recording is enabled.
Var make_result(Tensor value, std::vector<Var> parents, std::string op,
                std::function<void(const Node&)> backward);

/// Reverse topological schedule of the graph rooted at a scalar output.
class Tape {
 public:
  explicit Tape(const Var& root);

  /// Nodes in forward (topological) order; backward walks it in reverse.
  const std::vector<Node*>& order() const { return order_; }

  /// Seeds d(root)/d(root) = 1 and runs every backward rule exactly once.
  void backward();

 private:
  Var root_;
  std::vector<Node*> order_;
};

void backward(const Var& loss);

/// Disables graph recording on this thread while alive.
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

}  // namespace pattformer::ad
