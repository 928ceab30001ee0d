#include "pattformer/ad/var.hpp"

#include <unordered_set>

#include "pattformer/common/errors.hpp"

namespace pattformer::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (g.size() != value.size()) {
    throw ShapeError("gradient " + g.shape_str() + " does not match value " +
                     value.shape_str() + " in op '" + op + "'");
  }
  Tensor& buf = grad_buffer();
  auto dst = buf.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = requires_grad ? "leaf" : "constant";
}

Var make_result(Tensor value, std::vector<Var> parents, std::string op,
                std::function<void(const Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Var& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

Tape::Tape(const Var& root) : root_(root) {
  // Iterative post-order DFS; emits each node once after all its parents.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (!root.requires_grad()) return;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  if (!root_.defined() || !root_.requires_grad()) return;
  if (root_.value().size() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + root_.value().shape_str());
  }
  root_.node()->accumulate(Tensor(root_.value().shape(), 1.0));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void backward(const Var& loss) { Tape(loss).backward(); }

}  // namespace pattformer::ad
