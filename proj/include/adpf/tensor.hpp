#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adpf {

/// Row-major extents. A rank-0 shape denotes a scalar with one element.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the differentiation graph. Leaves have no backward_fn;
// interior nodes hold their parents so the graph stays alive for as long
// as any downstream tensor does.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into self.parents[i]->grad.
  std::function<void(Node& self)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  /// Scalar zero.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> values() const { return node_->data; }
  /// Direct write access; intended for leaves (initialisation, optimiser
  /// steps, checkpoint loading). Mutating an interior node invalidates its
  /// recorded backward rule.
  std::span<double> mutable_values() { return node_->data; }
  double operator[](std::size_t flat) const { return node_->data[flat]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return !node_->backward_fn; }

  /// Accumulated gradient. Same length as values() for any tensor that
  /// requires grad; empty for tensors outside the graph.
  std::span<const double> grad() const;
  void zero_grad();

  /// Copy of the values with no graph history and no gradient tracking.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, ops on this thread record no graph history.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

namespace detail {

using BackwardFn = std::function<void(Node& self)>;

/// Builds an op result. The node records parents and the backward rule only
/// when at least one input requires grad; otherwise the result is detached.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);

/// Gradient buffer of parent i, allocated on first use.
inline std::vector<double>& parent_grad(Node& self, std::size_t i) {
  return self.parents[i]->ensure_grad();
}

inline bool parent_tracks(const Node& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

}  // namespace detail

/// Operations reachable from a loss, in topological order (inputs before
/// consumers). Replaying in reverse visits every recorded op exactly once.
class GradTape {
 public:
  static GradTape record(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& entries() const { return order_; }

  /// Runs the backward rules in reverse order, seeding d(loss)/d(loss) = 1.
  void replay(const Tensor& loss) const;

 private:
  std::vector<detail::Node*> order_;
};

/// Accumulates d(loss)/d(leaf) into every gradient-tracking leaf reachable
/// from `loss`. Throws NotScalar unless loss has exactly one element.
void backward(const Tensor& loss);

}  // namespace adpf
