#pragma once

// Differentiable primitives over Tensor. Every op computes its forward
// value eagerly and, when a tape is active and an input requires grad,
// records one backward step that accumulates into the inputs' gradients.

#include "aasist3/rng.hpp"
#include "aasist3/tensor.hpp"

namespace aasist3 {

// ----- elementwise arithmetic -------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
// Elementwise max; ties route the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);

// ----- elementwise functions --------------------------------------------------
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor abs_op(const Tensor& x);
Tensor sin_op(const Tensor& x);
Tensor selu(const Tensor& x);
// slopes has the extent of the last axis of x and is broadcast over the rest.
Tensor prelu(const Tensor& x, const Tensor& slopes);

// ----- shape manipulation -----------------------------------------------------
Tensor reshape(const Tensor& x, const Shape& new_shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Rows [begin, end) along `axis`.
Tensor slice(const Tensor& x, int axis, int begin, int end);
// x: [B, N, D], indices: per-batch row ids (B * K entries) -> [B, K, D].
Tensor gather_nodes(const Tensor& x, const std::vector<int>& indices, int batch, int keep);
// pe: [N, D] added to every batch item of x: [B, N, D].
Tensor add_broadcast_nodes(const Tensor& x, const Tensor& pe);
// s: [B, D] multiplied onto every node of x: [B, N, D].
Tensor mul_broadcast_stack(const Tensor& x, const Tensor& s);
// v: [D] tiled to [B, D]; gradient sums over the batch.
Tensor expand_batch(const Tensor& v, int batch);
// All node pairs of x: [B, N, D] -> [B*N*N, D] with row (b*N + i)*N + j
// holding x[b,i,:] * x[b,j,:] elementwise.
Tensor pairwise_mul(const Tensor& x);
// g: [B, N] scales every feature of the matching node of x: [B, N, D].
Tensor mul_broadcast_gate(const Tensor& x, const Tensor& g);

// ----- linear algebra ---------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);          // [M,K] x [K,N]
Tensor bmm(const Tensor& a, const Tensor& b);             // [B,M,K] x [B,K,N]
// Swaps the last two axes: [..., M, N] -> [..., N, M].
Tensor transpose_last2(const Tensor& x);

// ----- reductions ---------------------------------------------------------
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor reduce_max(const Tensor& x, int axis);
Tensor reduce_mean(const Tensor& x, int axis);

// ----- normalization, attention, regularization -------------------------------
// softmax(x / temperature) along `axis`, max-subtracted for stability.
Tensor softmax_t(const Tensor& x, int axis, double temperature);

// Scale/shift parameters plus running statistics for one normalized width.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;  // not differentiated
  Tensor running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  explicit BatchNorm(int width);
  BatchNorm() = default;
};

// Statistics per last-axis feature, pooled over all leading axes.
Tensor batch_norm_lastdim(const Tensor& x, BatchNorm& bn, bool training);
// Statistics per channel for [B, C, F, T] layouts.
Tensor batch_norm_channels(const Tensor& x, BatchNorm& bn, bool training);

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// ----- convolution and pooling -------------------------------------------
// x: [B, Ci, F, T], w: [Co, Ci, KF, KT], bias: [Co]; zero padding pf/pt.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad_f, int pad_t);
// Non-overlapping window max pool; extents shrink by floor division.
Tensor maxpool2d(const Tensor& x, int win_f, int win_t);

// ----- initializers ------------------------------------------------------
Tensor kaiming_init(const Shape& shape, int fan_in, Rng& rng);
Tensor xavier_init(const Shape& shape, int fan_in, int fan_out, Rng& rng);
Tensor normal_init(const Shape& shape, double stddev, Rng& rng);

// ----- finite-difference gradient checking ------------------------------------
// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
// for d f / d x, central differences with step eps. `f` must rebuild its
// forward pass on every call; `params` are perturbed in place. When
// max_coords_per_tensor > 0 only that many evenly spaced coordinates are
// probed per tensor (large layers would otherwise need two forwards per
// coordinate).
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps = 1e-5, int max_coords_per_tensor = 0);

}  // namespace aasist3
