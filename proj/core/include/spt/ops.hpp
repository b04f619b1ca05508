#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spt/tensor.hpp"

// Differentiable tensor operations. Every op checks its shape contract and
// throws DimensionError naming the offending shapes. Reductions run
// sequentially left-to-right so results are bit-reproducible.
namespace spt::ops {

// 2-D matrix product [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a x b^T for [m,k] x [n,k] -> [m,n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
// Adds a [n] bias to every row of a [m,n] matrix.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Exact (erf-based) Gaussian error linear unit.
Tensor gelu(const Tensor& x);

Tensor sum(const Tensor& a);
// Sums out one axis; the result drops that axis (a rank-1 input gives a scalar).
Tensor sum_axis(const Tensor& a, std::size_t axis);
// Sum of scalar tensors.
Tensor add_n(std::span<const Tensor> scalars);

// Max-subtracted softmax / log-softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// Normalizes each row of [m,n] over its last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Gathers rows of a [V,d] table; gradients scatter-add back.
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);
// Leading rows [0, count) of a [m,n] matrix.
Tensor first_rows(const Tensor& x, std::size_t count);
// Columns [start, start+count) of a [m,n] matrix.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
// Stacks equal-shape tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
Tensor reshape(const Tensor& x, Shape shape);

/// -sum_e target[e] * log_probs[e] for 1-D rows. An all-zero target yields 0.
Tensor cross_entropy_row(const Tensor& log_probs, const Tensor& target_row);

/// -(1/divisor) * sum_i weights[i] * sum_e targets[i,e] * log_probs[i,e].
/// Targets and weights are constants; only log_probs receives a gradient.
Tensor weighted_cross_entropy(const Tensor& log_probs, std::span<const double> targets,
                              std::span<const double> weights, double divisor);

// -log_probs[row, col] as a scalar.
Tensor nll_at(const Tensor& log_probs, std::size_t row, std::size_t col);

}  // namespace spt::ops

namespace spt::testing {

// Fault injection used by gradient-check negative controls. When enabled, the
// softmax/log-softmax backward rules flip the sign of their output.
void set_softmax_gradient_fault(bool enabled);
bool softmax_gradient_fault();

}  // namespace spt::testing
