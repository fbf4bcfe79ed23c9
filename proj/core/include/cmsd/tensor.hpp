#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmsd {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node;

/// Receives the gradient flowing into an op's output and adds the
/// contribution for each input into `input_grads[i]`. A span is empty when
/// the corresponding input does not require a gradient.
using BackwardFn = std::function<void(const Node& out, std::span<const double> out_grad,
                                      std::span<const std::span<double>> input_grads)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // persistent; only meaningful on leaves
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  std::string_view op = "leaf";
};

/// Wraps a freshly computed value as an op output. When no input requires a
/// gradient the inputs and backward function are dropped.
Tensor record(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
              std::string_view op, BackwardFn backward);

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Tensors are handles: copying shares the underlying storage. Values of op
/// outputs are immutable; only leaves (parameters and constants) expose
/// mutable values. Rank 1 tensors act as a single row wherever an op works
/// on rows.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Rows when viewed as a matrix (1 for rank 0 and rank 1).
  std::size_t rows() const;
  /// Columns when viewed as a matrix (last extent; 1 for rank 0).
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Leaf copy of the values, cut from the graph.
  Tensor detach() const;
  /// Same storage viewed with another shape of equal element count.
  Tensor reshape(Shape shape) const;

  std::string_view op_name() const;
  const detail::Node* node() const { return node_.get(); }

 private:
  friend Tensor detail::record(Shape, std::vector<double>, std::vector<Tensor>, std::string_view,
                               detail::BackwardFn);
  friend class ComputationTape;

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered record of every op reachable from a root tensor.
/// Every node appears after all of its inputs.
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  std::span<const detail::Node* const> order() const { return order_; }
  std::size_t position(const Tensor& t) const;

  /// Reverse accumulation from the scalar root. Leaf gradients accumulate
  /// (+=) so callers must zero them between optimisation steps.
  void backward() const;

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<const detail::Node*> order_;
};

/// Convenience wrapper around ComputationTape(loss).backward().
void backward(const Tensor& loss);

}  // namespace cmsd
