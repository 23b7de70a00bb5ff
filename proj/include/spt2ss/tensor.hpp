#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace spt2ss {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded value in the computation graph. data and grad are flat
/// row-major arrays of shape_numel(shape) doubles; grad stays empty until
/// something accumulates into it.
struct Node {
  Shape shape;
  Eigen::ArrayXd data;
  Eigen::ArrayXd grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(const Eigen::ArrayXd&)> backward_fn;

  ~Node();

  /// Gradient accumulator, zero-initialized on first use.
  Eigen::ArrayXd& grad_acc();
};

/// Thread-local switch: while disabled, new ops record no graph edges.
class GradMode {
 public:
  static bool enabled();
  static void set(bool on);
};

/// RAII scope that disables graph recording (used for inference and for
/// the finite-difference side of gradient checks).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Shared handle to a graph node. Copying a Tensor aliases the same value;
/// ops in ops.hpp build new nodes and wire up reverse-mode backward
/// functions. A graph is confined to one thread from forward through
/// backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
  static Tensor from_data(Shape shape, const std::vector<double>& data,
                          bool requires_grad = false);
  static Tensor from_data(Shape shape, std::initializer_list<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->data.size(); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }

  Eigen::ArrayXd& data() { return node_->data; }
  const Eigen::ArrayXd& data() const { return node_->data; }
  Eigen::ArrayXd& grad() { return node_->grad_acc(); }
  bool has_grad() const { return node_->grad.size() > 0; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }

  /// Value of a single-element tensor.
  double value() const;

  /// Reverse-mode sweep from a scalar. Fills grad on every reachable
  /// tensor with requires_grad, accumulating (+=) across multiple uses;
  /// d(loss)/d(loss) is exactly 1. The traversed graph is released
  /// afterwards, so backward is single-shot per forward pass.
  void backward() const;

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

/// Builds an op result: wires parents and backward only while grad mode is
/// on and at least one parent requires grad.
Tensor make_op(Shape shape, Eigen::ArrayXd data, const std::vector<Tensor>& parents,
               std::function<void(const Eigen::ArrayXd&)> backward_fn);

}  // namespace spt2ss
