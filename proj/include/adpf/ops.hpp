#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adpf/tensor.hpp"

namespace adpf {

enum class ElementwiseKind { add, sub, mul, div, max0, sigmoid, exp, log, abs, scale };

// Binary kinds accept equal shapes or a single-element operand on either
// side, which is broadcast. `scale` multiplies by `factor`; unary kinds
// ignore it.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b);
Tensor elementwise(ElementwiseKind kind, const Tensor& a, double factor = 1.0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
/// Throws DomainError if any entry is <= 0.
Tensor log(const Tensor& a);
/// Subgradient at 0 is 0.
Tensor abs(const Tensor& a);
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// max(a, floor) elementwise; gradient flows only where a > floor.
Tensor floor_at(const Tensor& a, double floor);

/// [m x k] . [k x p] -> [m x p].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Same data, new extents. Throws ShapeMismatch if element counts differ.
Tensor reshape(const Tensor& a, Shape shape);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& t, std::size_t axis);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
/// Sum of a * c where c is a constant weight vector of the same length.
Tensor weighted_sum(const Tensor& a, std::span<const double> weights);

/// Stacks along the leading axis; trailing extents must agree. Rank-0
/// inputs are treated as one-element vectors.
Tensor concat0(const std::vector<Tensor>& parts);
/// Rows [begin, end) of the leading axis.
Tensor slice0(const Tensor& t, std::size_t begin, std::size_t end);

namespace kernels {

// Plain row-major kernels shared by the differentiable ops and the layers.
// out[m x p] += a[m x k] . b[k x p]
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t m, std::size_t k, std::size_t p);
// out[m x p] += a[m x k] . b^T where b is [p x k]
void gemm_acc_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t p);
// out[k x p] += a^T . b where a is [m x k], b is [m x p]
void gemm_acc_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t p);

}  // namespace kernels

}  // namespace adpf
