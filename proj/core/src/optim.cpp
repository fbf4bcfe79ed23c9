#include "cmsd/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cmsd/errors.hpp"

namespace cmsd {

Tensor ParameterSet::add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-s, s);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = dist(rng);
  return add(name, Tensor(Shape{rows, cols}, std::move(values)));
}

Tensor ParameterSet::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape)));
}

Tensor ParameterSet::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  if (!tensor.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf tensor");
  // Re-wrap so the registered handle requires a gradient.
  Tensor leaf(tensor.shape(), std::vector<double>(tensor.values().begin(), tensor.values().end()), true);
  params_.push_back(Parameter{name, leaf, std::vector<double>(leaf.numel(), 0.0)});
  return leaf;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *it;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  set_lr(lr);
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("sgd: momentum must lie in [0,1), got " + std::to_string(momentum));
  }
}

void SgdMomentum::set_lr(double lr) {
  if (!(lr > 0.0)) throw ConfigError("sgd: learning rate must be positive, got " + std::to_string(lr));
  lr_ = lr;
}

void SgdMomentum::step(ParameterSet& params) const {
  for (auto& p : params.params()) {
    if (!p.tensor.has_grad()) throw ContractError("sgd: parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : params.params()) {
    auto grad = p.tensor.grad();
    auto values = p.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      p.momentum[i] = momentum_ * p.momentum[i] + grad[i];
      values[i] -= lr_ * p.momentum[i];
    }
  }
}

double gradient_norm(const ParameterSet& params) {
  double total = 0.0;
  for (const auto& p : params.params()) {
    for (double g : p.tensor.grad()) total += g * g;
  }
  return std::sqrt(total);
}

void clip_gradients(ParameterSet& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (!(norm > max_norm)) return;
  const double k = max_norm / norm;
  for (auto& p : params.params()) {
    if (!p.tensor.has_grad()) continue;
    for (auto& g : p.tensor.mutable_grad()) g *= k;
  }
}

}  // namespace cmsd
