#pragma once

#include <cstddef>
#include <span>

#include "sketchpart/nn/tensor.hpp"

// Differentiable primitives. Matrix ops expect rank-2 tensors; vectors
// used as biases or norms are rank-1.
namespace sketchpart::nn {

/// x[n,k] * w[k,m] (+ bias[m]).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift = 0.0);

Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
/// Gradient is zero where the input was clipped.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// GELU, tanh approximation.
Tensor gelu(const Tensor& x);

/// Sum of all entries, as a scalar.
Tensor sum(const Tensor& x);

/// Softmax along `axis`, numerically stabilized by max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Row-wise layer normalization of x[n,d] with affine gamma[d], beta[d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Gathers rows of table[n,d].
Tensor embedding(const Tensor& table, std::span<const std::size_t> indices);

/// Scaled dot-product attention over already projected q[nq,d], k[nk,d],
/// v[nk,d], split into `heads` column blocks of width d/heads.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);

}  // namespace sketchpart::nn
