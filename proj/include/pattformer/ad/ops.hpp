#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pattformer/ad/var.hpp"

// Differentiable primitives over rank-2 arrays. Every function checks shapes
// and throws ShapeError naming both operands on mismatch. Backward rules
// accumulate into parent gradients, so a value used twice receives the sum of
// both contributions.
namespace pattformer::ad {

Var constant(Tensor value);
Var parameter(Tensor value);

// ---- linear algebra and elementwise arithmetic ----
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a (n x m) + bias (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& bias);
/// a (n x m) * s (n x 1) broadcast over columns.
Var mul_col(const Var& a, const Var& s);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double value);

// ---- layout ----
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var repeat_cols(const Var& a, std::size_t times);
Var gather_rows(const Var& a, std::span<const std::size_t> index);
/// Row r of the result is a(r, column[r]); result is n x 1.
Var pick(const Var& a, std::span<const std::size_t> column);

// ---- segment operations (CSR offsets of length segments+1) ----
/// Column-wise max of the rows assigned to each segment id.
Var scatter_max(const Var& a, std::span<const std::size_t> segment,
                std::size_t num_segments);
/// Sum of consecutive row ranges; an empty range yields a zero row.
Var segment_sum(const Var& a, std::span<const std::size_t> offsets);
/// Softmax over consecutive row ranges, independently per column.
Var segment_softmax(const Var& a, std::span<const std::size_t> offsets);
/// Per-head dot product: a, b are n x (heads*c); result n x heads.
Var head_dot(const Var& a, const Var& b, std::size_t heads);
/// Scales each head block of v (n x heads*c) by w (n x heads).
Var mul_heads(const Var& w, const Var& v, std::size_t heads);

// ---- reductions ----
Var reduce_sum(const Var& a);
Var reduce_mean(const Var& a);
Var reduce_sum(const Var& a, int axis);
Var reduce_mean(const Var& a, int axis);
Var reduce_max(const Var& a, int axis);

// ---- nonlinearities ----
Var softmax(const Var& a, int axis = 1);
Var log_softmax(const Var& a);  // along rows
Var relu(const Var& a);
Var gelu(const Var& a);  // exact erf form
Var sigmoid(const Var& a);
Var log_sigmoid(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
/// Elementwise 0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise.
Var smooth_l1_elementwise(const Var& a, double beta);

// ---- layers ----
struct BatchNormState {
  Tensor* running_mean = nullptr;  // 1 x C
  Tensor* running_var = nullptr;   // 1 x C
  double momentum = 0.9;           // weight of the old running value
  double eps = 1e-5;
};

/// Normalizes each column over the rows (points play the batch role).
/// Training mode uses batch statistics and updates the running state.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               const BatchNormState& state, bool training);

/// Normalizes each row to zero mean and unit variance (no affine terms).
Var layer_norm(const Var& x, double eps = 1e-5);

Var linear(const Var& x, const Var& weight, const Var& bias);
/// linear -> gelu -> linear.
Var mlp2(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2);

}  // namespace pattformer::ad
