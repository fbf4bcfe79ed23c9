#include "cmsd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "cmsd/errors.hpp"

namespace cmsd {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(std::span<const double> data, std::size_t rows, std::size_t cols) {
  return ConstMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap mview(std::span<double> data, std::size_t rows, std::size_t cols) {
  return MutMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
         to_string(b.shape());
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() == 0 || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " + to_string(t.shape()));
  }
}

Shape rows_shape(const Tensor& like, std::size_t rows, std::size_t cols) {
  if (like.rank() == 1) return Shape{cols};
  return Shape{rows, cols};
}

template <typename F, typename G>
Tensor unary(const Tensor& x, std::string_view name, F forward, G derivative) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return detail::record(
      x.shape(), std::move(out), {x}, name,
      [derivative](const detail::Node& node, std::span<const double> g,
                   std::span<const std::span<double>> gin) {
        const auto& xv = node.inputs[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * derivative(xv[i], node.value[i]);
      });
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError(shapes(op, a, b));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  if (b.rank() != 2) throw DimensionError(shapes("matmul", a, b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError(shapes("matmul", a, b));
  std::vector<double> out(m * n);
  mview(out, m, n).noalias() = view(a.values(), m, k) * view(b.values(), k, n);
  return detail::record(rows_shape(a, m, n), std::move(out), {a, b}, "matmul",
                        [m, k, n](const detail::Node& node, std::span<const double> g,
                                  std::span<const std::span<double>> gin) {
                          auto G = view(g, m, n);
                          if (!gin[0].empty()) {
                            mview(gin[0], m, k).noalias() += G * view(node.inputs[1]->value, k, n).transpose();
                          }
                          if (!gin[1].empty()) {
                            mview(gin[1], k, n).noalias() += view(node.inputs[0]->value, m, k).transpose() * G;
                          }
                        });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw DimensionError(shapes("matmul_nt", a, b));
  std::vector<double> out(m * n);
  mview(out, m, n).noalias() =
      view(a.values(), m, k) * view(b.values(), n, k).transpose();
  return detail::record(rows_shape(a, m, n), std::move(out), {a, b}, "matmul_nt",
                        [m, k, n](const detail::Node& node, std::span<const double> g,
                                  std::span<const std::span<double>> gin) {
                          auto G = view(g, m, n);
                          if (!gin[0].empty()) {
                            mview(gin[0], m, k).noalias() += G * view(node.inputs[1]->value, n, k);
                          }
                          if (!gin[1].empty()) {
                            mview(gin[1], n, k).noalias() += G.transpose() * view(node.inputs[0]->value, m, k);
                          }
                        });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix("affine", x);
  if (weight.rank() != 2 || weight.cols() != x.cols()) {
    throw DimensionError(shapes("affine", x, weight));
  }
  const std::size_t rows = x.rows(), in = x.cols(), out_dim = weight.rows();
  if (bias.numel() != out_dim) throw DimensionError(shapes("affine", weight, bias));
  std::vector<double> out(rows * out_dim);
  auto Y = mview(out, rows, out_dim);
  Y.noalias() = view(x.values(), rows, in) * view(weight.values(), out_dim, in).transpose();
  Y.rowwise() += view(bias.values(), 1, out_dim).row(0);
  return detail::record(rows_shape(x, rows, out_dim), std::move(out), {x, weight, bias}, "affine",
                        [rows, in, out_dim](const detail::Node& node, std::span<const double> g,
                                            std::span<const std::span<double>> gin) {
                          auto G = view(g, rows, out_dim);
                          if (!gin[0].empty()) {
                            mview(gin[0], rows, in).noalias() += G * view(node.inputs[1]->value, out_dim, in);
                          }
                          if (!gin[1].empty()) {
                            mview(gin[1], out_dim, in).noalias() +=
                                G.transpose() * view(node.inputs[0]->value, rows, in);
                          }
                          if (!gin[2].empty()) {
                            mview(gin[2], 1, out_dim).row(0) += G.colwise().sum();
                          }
                        });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return detail::record(a.shape(), std::move(out), {a, b}, "add",
                        [](const detail::Node&, std::span<const double> g,
                           std::span<const std::span<double>> gin) {
                          for (const auto& dst : gin) {
                            if (dst.empty()) continue;
                            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return detail::record(a.shape(), std::move(out), {a, b}, "sub",
                        [](const detail::Node&, std::span<const double> g,
                           std::span<const std::span<double>> gin) {
                          if (!gin[0].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                          if (!gin[1].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return detail::record(a.shape(), std::move(out), {a, b}, "mul",
                        [](const detail::Node& node, std::span<const double> g,
                           std::span<const std::span<double>> gin) {
                          const auto& x = node.inputs[0]->value;
                          const auto& y = node.inputs[1]->value;
                          if (!gin[0].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
                          if (!gin[1].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
                        });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw DomainError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
  }
  return unary(
      x, "leaky_relu", [slope](double v) { return v >= 0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0 ? 1.0 : slope; });
}

Tensor softmax(const Tensor& x) {
  if (x.numel() == 0 || x.cols() == 0) throw DomainError("softmax of an empty tensor");
  const std::size_t rows = x.rows(), cols = x.cols();
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double peak = *std::max_element(src, src + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += dst[c] = std::exp(src[c] - peak);
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= total;
  }
  return detail::record(x.shape(), std::move(out), {x}, "softmax",
                        [rows, cols](const detail::Node& node, std::span<const double> g,
                                     std::span<const std::span<double>> gin) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double* y = node.value.data() + r * cols;
                            const double* gr = g.data() + r * cols;
                            double dot = 0.0;
                            for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
                            for (std::size_t c = 0; c < cols; ++c) gin[0][r * cols + c] += y[c] * (gr[c] - dot);
                          }
                        });
}

Tensor log_softmax(const Tensor& x) {
  if (x.numel() == 0 || x.cols() == 0) throw DomainError("log_softmax of an empty tensor");
  const std::size_t rows = x.rows(), cols = x.cols();
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * cols;
    const double peak = *std::max_element(src, src + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(src[c] - peak);
    const double lse = peak + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = src[c] - lse;
  }
  return detail::record(x.shape(), std::move(out), {x}, "log_softmax",
                        [rows, cols](const detail::Node& node, std::span<const double> g,
                                     std::span<const std::span<double>> gin) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double* y = node.value.data() + r * cols;
                            const double* gr = g.data() + r * cols;
                            double total = 0.0;
                            for (std::size_t c = 0; c < cols; ++c) total += gr[c];
                            for (std::size_t c = 0; c < cols; ++c)
                              gin[0][r * cols + c] += gr[c] - std::exp(y[c]) * total;
                          }
                        });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 || a.rows() != b.rows()) {
    throw DimensionError(shapes("concat", a, b));
  }
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols(), cols = ca + cb;
  auto av = a.values(), bv = b.values();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * cols);
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * cols + ca);
  }
  Shape shape = a.shape();
  shape.back() = cols;
  return detail::record(std::move(shape), std::move(out), {a, b}, "concat",
                        [rows, ca, cb, cols](const detail::Node&, std::span<const double> g,
                                             std::span<const std::span<double>> gin) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            if (!gin[0].empty())
                              for (std::size_t c = 0; c < ca; ++c) gin[0][r * ca + c] += g[r * cols + c];
                            if (!gin[1].empty())
                              for (std::size_t c = 0; c < cb; ++c) gin[1][r * cb + c] += g[r * cols + ca + c];
                          }
                        });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != cols) throw DimensionError(shapes("concat_rows", parts.front(), p));
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    auto v = p.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return detail::record(Shape{rows, cols}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                        "concat_rows",
                        [offsets](const detail::Node&, std::span<const double> g,
                                  std::span<const std::span<double>> gin) {
                          for (std::size_t k = 0; k < gin.size(); ++k) {
                            for (std::size_t i = 0; i < gin[k].size(); ++i) gin[k][i] += g[offsets[k] + i];
                          }
                        });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix("slice_cols", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (begin + count > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") outside " + to_string(x.shape()));
  }
  auto in = x.values();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(in.data() + r * cols + begin, count, out.data() + r * count);
  return detail::record(rows_shape(x, rows, count), std::move(out), {x}, "slice_cols",
                        [rows, cols, begin, count](const detail::Node&, std::span<const double> g,
                                                   std::span<const std::span<double>> gin) {
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < count; ++c) gin[0][r * cols + begin + c] += g[r * count + c];
                        });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix("slice_rows", x);
  const std::size_t cols = x.cols();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") outside " + to_string(x.shape()));
  }
  auto in = x.values();
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          in.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
  return detail::record(Shape{count, cols}, std::move(out), {x}, "slice_rows",
                        [begin, cols](const detail::Node&, std::span<const double> g,
                                      std::span<const std::span<double>> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][begin * cols + i] += g[i];
                        });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  if (table.rank() != 2) throw DimensionError("gather_rows: table must be rank 2, got " + to_string(table.shape()));
  const std::size_t vocab = table.rows(), dim = table.cols();
  auto in = table.values();
  std::vector<double> out(ids.size() * dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw IndexError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(in.data() + ids[r] * dim, dim, out.data() + r * dim);
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return detail::record(Shape{ids.size(), dim}, std::move(out), {table}, "gather_rows",
                        [rows = std::move(rows), dim](const detail::Node&, std::span<const double> g,
                                                      std::span<const std::span<double>> gin) {
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t c = 0; c < dim; ++c) gin[0][rows[r] * dim + c] += g[r * dim + c];
                        });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::record(Shape{}, {total}, {x}, "sum",
                        [](const detail::Node&, std::span<const double> g,
                           std::span<const std::span<double>> gin) {
                          for (auto& v : gin[0]) v += g[0];
                        });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DomainError("mean of an empty tensor");
  const double n = static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::record(Shape{}, {total / n}, {x}, "mean",
                        [n](const detail::Node&, std::span<const double> g,
                            std::span<const std::span<double>> gin) {
                          for (auto& v : gin[0]) v += g[0] / n;
                        });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same("mse_loss", pred, target);
  if (pred.numel() == 0) throw DomainError("mse_loss of empty tensors");
  auto p = pred.values(), t = target.values();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  return detail::record(Shape{}, {total / n}, {pred, target}, "mse_loss",
                        [n](const detail::Node& node, std::span<const double> g,
                            std::span<const std::span<double>> gin) {
                          const auto& pv = node.inputs[0]->value;
                          const auto& tv = node.inputs[1]->value;
                          const double k = 2.0 * g[0] / n;
                          for (std::size_t i = 0; i < pv.size(); ++i) {
                            const double d = k * (pv[i] - tv[i]);
                            if (!gin[0].empty()) gin[0][i] += d;
                            if (!gin[1].empty()) gin[1][i] -= d;
                          }
                        });
}

Tensor cross_entropy(const Tensor& logits, int target) {
  if (logits.rank() != 1) throw DimensionError("cross_entropy: expected rank 1 logits, got " + to_string(logits.shape()));
  const int targets[] = {target};
  return cross_entropy(logits, std::span<const int>(targets), Reduction::sum);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, Reduction reduction) {
  require_matrix("cross_entropy", logits);
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  if (classes == 0) throw DomainError("cross_entropy over zero classes");
  auto in = logits.values();
  // Softmax probabilities are kept for the backward pass.
  std::vector<double> probs(in.size());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    const double* src = in.data() + r * classes;
    const std::size_t top = static_cast<std::size_t>(std::max_element(src, src + classes) - src);
    const double peak = src[top];
    // log-sum-exp as log1p over the non-maximal terms keeps tiny losses exact.
    double rest = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(src[c] - peak);
      if (c != top) rest += probs[r * classes + c];
    }
    const double z = 1.0 + rest;
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= z;
    total += std::log1p(rest) - (src[targets[r]] - peak);
    ++counted;
  }
  const double divisor = reduction == Reduction::mean && counted > 0 ? static_cast<double>(counted) : 1.0;
  std::vector<int> kept(targets.begin(), targets.end());
  return detail::record(Shape{}, {total / divisor}, {logits}, "cross_entropy",
                        [probs = std::move(probs), kept = std::move(kept), classes, divisor](
                            const detail::Node&, std::span<const double> g,
                            std::span<const std::span<double>> gin) {
                          const double k = g[0] / divisor;
                          for (std::size_t r = 0; r < kept.size(); ++r) {
                            if (kept[r] == kIgnoreIndex) continue;
                            for (std::size_t c = 0; c < classes; ++c) {
                              double d = probs[r * classes + c];
                              if (static_cast<int>(c) == kept[r]) d -= 1.0;
                              gin[0][r * classes + c] += k * d;
                            }
                          }
                        });
}

}  // namespace cmsd
