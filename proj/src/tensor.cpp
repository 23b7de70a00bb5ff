#include "spt2ss/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace spt2ss {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Node::~Node() {
  // Flatten the parent chain so dropping a long graph never recurses.
  std::vector<NodePtr> stack(std::move(parents));
  while (!stack.empty()) {
    NodePtr p = std::move(stack.back());
    stack.pop_back();
    if (p && p.use_count() == 1) {
      for (auto& gp : p->parents) stack.push_back(std::move(gp));
      p->parents.clear();
    }
  }
}

Eigen::ArrayXd& Node::grad_acc() {
  if (grad.size() != data.size()) grad = Eigen::ArrayXd::Zero(data.size());
  return grad;
}

namespace {
thread_local bool g_grad_mode = true;

NodePtr new_node(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  const std::int64_t n = shape_numel(shape);
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive extent " + shape_str(shape));
  }
  if (n != data.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}
}  // namespace

bool GradMode::enabled() { return g_grad_mode; }
void GradMode::set(bool on) { g_grad_mode = on; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Eigen::ArrayXd data = Eigen::ArrayXd::Zero(shape_numel(shape));
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Eigen::ArrayXd data = Eigen::ArrayXd::Constant(shape_numel(shape), value);
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, const std::vector<double>& data, bool requires_grad) {
  Eigen::ArrayXd arr(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) arr[static_cast<Eigen::Index>(i)] = data[i];
  return from_data(std::move(shape), std::move(arr), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::initializer_list<double> data, bool requires_grad) {
  Eigen::ArrayXd arr(static_cast<Eigen::Index>(data.size()));
  Eigen::Index i = 0;
  for (double v : data) arr[i++] = v;
  return from_data(std::move(shape), std::move(arr), requires_grad);
}

void Tensor::zero_grad() { node_->grad_acc().setZero(); }

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("value() requires a single-element tensor, got shape " +
                                shape_str(shape()));
  }
  return node_->data[0];
}

void Tensor::backward() const {
  if (!defined()) throw std::invalid_argument("backward() on an empty tensor");
  if (size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw std::invalid_argument("backward(): loss does not depend on any differentiable tensor");
  }

  // Iterative post-order over the differentiable subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  node_->grad_acc().setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->backward_fn(n->grad);
      n->backward_fn = nullptr;
      // Interior gradients are spent once propagated; the root and leaves keep theirs.
      if (n != node_.get()) n->grad.resize(0);
    }
  }
  for (Node* n : order) n->parents.clear();
}

Tensor make_op(Shape shape, Eigen::ArrayXd data, const std::vector<Tensor>& parents,
               std::function<void(const Eigen::ArrayXd&)> backward_fn) {
  bool needs_grad = false;
  if (GradMode::enabled()) {
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), needs_grad);
  if (needs_grad) {
    out.node()->parents.reserve(parents.size());
    for (const Tensor& p : parents) out.node()->parents.push_back(p.node());
    out.node()->backward_fn = std::move(backward_fn);
  }
  return out;
}

}  // namespace spt2ss
