#include "zskd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "zskd/error.hpp"

namespace zskd {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (int64_t d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor shape must have positive dims, got " +
                           shape_str(shape));
    }
  }
}

thread_local bool g_grad_enabled = true;

}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool value) { g_grad_enabled = value; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<TensorNode>();
  node->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("from_data: " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::gaussian(Shape shape, double std_dev, RngState& rng,
                        bool requires_grad) {
  if (std_dev <= 0.0) {
    throw ParameterError("gaussian: std must be positive");
  }
  Tensor t = zeros(std::move(shape), requires_grad);
  rng.fill_gaussian(t.data(), t.vec().size(), std_dev);
  return t;
}

int64_t Tensor::dim(int64_t i) const {
  int64_t n = ndim();
  if (i < 0) i += n;
  if (i < 0 || i >= n) {
    throw DimensionError("dim index " + std::to_string(i) + " out of range for " +
                         shape_str(shape()));
  }
  return node_->shape[static_cast<size_t>(i)];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() requires a one-element tensor, got " +
                        shape_str(shape()));
  }
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("grad requested before backward populated it");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<TensorNode>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

Tensor Tensor::clone() const { return detach(); }

void Tensor::backward() {
  if (!node_) throw ContractError("backward on an undefined tensor");
  if (numel() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        shape_str(shape()));
  }
  if (!node_->needs_grad()) {
    throw ContractError("backward on a tensor outside any live graph");
  }

  // Iterative post-order DFS; children precede parents in `order`, so the
  // reverse sweep sees each node after all its consumers.
  std::vector<std::shared_ptr<TensorNode>> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    std::shared_ptr<TensorNode> node;
    size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({node_, 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      auto& parent = top.node->parents[top.next_parent++];
      if (seen.insert(parent.get()).second) {
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  for (auto& n : order) {
    if (n->needs_grad()) n->ensure_grad();
  }
  node_->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode& n = **it;
    if (n.backward_fn) n.backward_fn(n);
  }

  // The tape is one-shot: free edges and closures, keep data and grads.
  for (auto& n : order) {
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

Tensor make_op_result(Shape shape, std::vector<double> data,
                      const std::vector<Tensor>& inputs,
                      std::function<void(TensorNode&)> backward_fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  if (!GradMode::enabled()) return out;
  bool track = false;
  for (const Tensor& t : inputs) {
    if (t.defined() && t.node()->needs_grad()) {
      track = true;
      break;
    }
  }
  if (!track) return out;
  auto& node = *out.node();
  node.parents.reserve(inputs.size());
  for (const Tensor& t : inputs) node.parents.push_back(t.node());
  node.backward_fn = std::move(backward_fn);
  return out;
}

}  // namespace zskd
