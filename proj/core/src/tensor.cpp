#include "cmsd/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cmsd/errors.hpp"

namespace cmsd {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->value.assign(element_count(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != element_count(shape)) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(Shape{}, {v}, requires_grad); }

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor(Shape{values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

const detail::Node& Tensor::checked() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }
std::size_t Tensor::numel() const { return checked().value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() < 2 ? 1 : element_count(s) / s.back();
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const { return checked().value; }

std::span<double> Tensor::mutable_values() {
  checked();
  if (node_->backward) throw ContractError("values of op outputs are immutable");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return checked().value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) {
    throw IndexError("tensor index (" + std::to_string(row) + "," + std::to_string(col) +
                     ") outside " + to_string(shape()));
  }
  return checked().value[row * cols() + col];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
bool Tensor::is_leaf() const { return !checked().backward; }
bool Tensor::has_grad() const { return !checked().grad.empty(); }
std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::mutable_grad() {
  checked();
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  checked();
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), checked().value, false); }

Tensor Tensor::reshape(Shape new_shape) const {
  if (element_count(new_shape) != numel()) {
    throw DimensionError("reshape " + to_string(shape()) + " -> " + to_string(new_shape));
  }
  return detail::record(std::move(new_shape), checked().value, {*this}, "reshape",
                        [](const detail::Node&, std::span<const double> g,
                           std::span<const std::span<double>> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                        });
}

std::string_view Tensor::op_name() const { return checked().op; }

namespace detail {

Tensor record(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
              std::string_view op, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

ComputationTape::ComputationTape(const Tensor& root) : root_(root.node_) {
  if (!root_) throw ContractError("tape root is undefined");
  // Iterative post-order DFS; inputs are visited in declaration order so the
  // resulting order is deterministic.
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::pair<const detail::Node*, std::size_t>> stack;
  stack.emplace_back(root_.get(), 0);
  seen.insert(root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

std::size_t ComputationTape::position(const Tensor& t) const {
  auto it = std::find(order_.begin(), order_.end(), t.node());
  if (it == order_.end()) throw ContractError("tensor is not on this tape");
  return static_cast<std::size_t>(it - order_.begin());
}

void ComputationTape::backward() const {
  if (root_->value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(root_->shape));
  }
  if (!root_->requires_grad) return;

  std::unordered_map<const detail::Node*, std::size_t> index;
  index.reserve(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) index.emplace(order_[i], i);

  std::vector<std::vector<double>> grads(order_.size());
  grads.back().assign(1, 1.0);

  std::vector<std::span<double>> input_grads;
  for (std::size_t i = order_.size(); i-- > 0;) {
    const detail::Node* node = order_[i];
    if (!node->backward || grads[i].empty()) continue;
    input_grads.assign(node->inputs.size(), std::span<double>{});
    for (std::size_t k = 0; k < node->inputs.size(); ++k) {
      const detail::Node* in = node->inputs[k].get();
      if (!in->requires_grad) continue;
      auto& buffer = grads[index.at(in)];
      if (buffer.empty()) buffer.assign(in->value.size(), 0.0);
      input_grads[k] = buffer;
    }
    node->backward(*node, grads[i], input_grads);
    if (node != root_.get()) std::vector<double>().swap(grads[i]);
  }

  // Leaf totals are added once so repeated passes scale gradients exactly.
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const detail::Node* node = order_[i];
    if (node->backward || grads[i].empty()) continue;
    auto* leaf = const_cast<detail::Node*>(node);
    if (leaf->grad.empty()) leaf->grad.assign(leaf->value.size(), 0.0);
    for (std::size_t k = 0; k < grads[i].size(); ++k) leaf->grad[k] += grads[i][k];
  }
}

void backward(const Tensor& loss) { ComputationTape(loss).backward(); }

}  // namespace cmsd
