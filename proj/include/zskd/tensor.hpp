#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zskd/rng.hpp"

namespace zskd {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage plus the autodiff graph edge for one tensor. Ops attach
// `parents` and `backward_fn` to intermediate nodes; leaves carry
// `requires_grad`. The backward function reads this node's grad and
// accumulates into the parents' grads.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool needs_grad() const { return requires_grad || backward_fn != nullptr; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Value-semantics handle onto a shared TensorNode. Copying a Tensor
// aliases the same storage, which is what the training loops want:
// parameters are shared between the model and the optimizer.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);
  // i.i.d. N(0, std^2) entries; advances rng.
  static Tensor gaussian(Shape shape, double std_dev, RngState& rng,
                         bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t ndim() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t dim(int64_t i) const;
  int64_t numel() const { return node_->numel(); }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  std::vector<double>& vec() { return node_->data; }
  const std::vector<double>& vec() const { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_graph() const { return node_->backward_fn != nullptr; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  // Same values, no graph, detached storage.
  Tensor detach() const;
  // Copy of values and shape (never aliases).
  Tensor clone() const;

  // Reverse pass from a scalar. Fills grad on every reachable node that
  // requires it, then frees the graph edges it walked.
  void backward();

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<TensorNode> node_;
};

// Thread-local switch: while disabled, ops never record graph edges.
// Evaluation passes run under NoGradGuard to skip tape bookkeeping.
struct GradMode {
  static bool enabled();
  static void set(bool value);
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

// Shared helper for op implementations: builds the result tensor and, if
// grad mode is on and any input participates in the graph, attaches the
// backward closure.
Tensor make_op_result(Shape shape, std::vector<double> data,
                      const std::vector<Tensor>& inputs,
                      std::function<void(TensorNode&)> backward_fn);

}  // namespace zskd
