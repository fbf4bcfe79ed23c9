#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmsd/tensor.hpp"

namespace cmsd {

// Matrix products. Rank 1 operands are treated as a single row.

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [m x k] . [n x k]^T -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// x . W^T + b with x [rows x in], W [out x in], b [out]; bias broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Pointwise.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Subgradient at exactly 0 is 1 (positive branch).
Tensor leaky_relu(const Tensor& x, double slope);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Row-wise normalisation (over the last extent).

Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

// Layout.

/// Joins along the last extent; leading extents must agree.
Tensor concat(const Tensor& a, const Tensor& b);
/// Stacks rank 2 tensors (or rank 1 rows) of equal width.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
/// Rows `ids` of `table`; gradient scatters back into those rows.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

// Reductions and losses.

enum class Reduction { mean, sum };

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Targets equal to this value contribute nothing to a cross-entropy loss.
inline constexpr int kIgnoreIndex = -1;

/// -log softmax(logits)[target] for a rank 1 logit vector.
Tensor cross_entropy(const Tensor& logits, int target);
/// Row-wise cross-entropy over [rows x classes]. Mean reduction divides by the
/// number of non-ignored rows (0 when every row is ignored).
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     Reduction reduction = Reduction::mean);

}  // namespace cmsd
