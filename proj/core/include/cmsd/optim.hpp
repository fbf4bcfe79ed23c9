#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cmsd/tensor.hpp"

namespace cmsd {

using Rng = std::mt19937_64;

/// A learnable tensor plus its SGD momentum buffer.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> momentum;
};

/// Owns every learnable tensor of a model in registration order.
class ParameterSet {
 public:
  /// Weight matrix [rows x cols] drawn from U(-s, s), s = 1/sqrt(cols).
  Tensor add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
  /// Zero-initialised tensor (biases).
  Tensor add_zeros(const std::string& name, Shape shape);
  /// Registers an existing leaf tensor; it is flagged as requiring a gradient.
  Tensor add(const std::string& name, Tensor tensor);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::span<Parameter> params() { return params_; }
  std::span<const Parameter> params() const { return params_; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grads();

 private:
  std::vector<Parameter> params_;
};

/// SGD with heavy-ball momentum:
///   buffer <- momentum * buffer + grad;  param <- param - lr * buffer
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  void step(ParameterSet& params) const;
  double lr() const { return lr_; }
  void set_lr(double lr);
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
};

/// L2 norm over all parameter gradients (missing grads count as zero).
double gradient_norm(const ParameterSet& params);
/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
void clip_gradients(ParameterSet& params, double max_norm);

}  // namespace cmsd
