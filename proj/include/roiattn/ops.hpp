#pragma once

#include <span>
#include <vector>

#include "roiattn/tensor.hpp"

namespace roiattn {

// All operations run eagerly and, when a Tape is active and any input
// requires gradients, record a backward rule. Reductions accumulate in
// 64-bit partials. No broadcasting beyond the bias adds built into
// linear/conv2d; every other shape mismatch throws ShapeError.

// a(m×k) · b(k×n) -> (m×n)
Tensor matmul(const Tensor& a, const Tensor& b);

// (m×n) -> (n×m)
Tensor transpose2d(const Tensor& x);

// x(n×f) · w(f×o) + b(o) -> (n×o); bias broadcast over rows
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x(n×c×h×w), weight(o×c×kh×kw), bias(o); cross-correlation.
// Output spatial extent (h + 2*padding - kh) / stride + 1 must divide
// exactly, else ConfigError.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

Tensor relu(const Tensor& x);

// Elementwise sum; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);

// Exponent-normalization along dim with max-subtraction; slices along dim
// sum to 1 and are strictly positive.
Tensor softmax_dim(const Tensor& x, int dim);

// Divides each slice along dim by (sum of slice + eps). Intended for
// nonnegative input (post-softmax).
Tensor l1_normalize_dim(const Tensor& x, int dim, float eps);

// Concatenates along the channel axis: axis 0 for rank-3 (c×h×w), axis 1
// for rank-4 (n×c×h×w). All other extents must agree.
Tensor concat_channels(const std::vector<Tensor>& parts);

// Copy with a new shape of equal element count.
Tensor reshape(const Tensor& x, Shape new_shape);

// (d0×d1×...×dk) -> (d0 × rest)
Tensor flatten2d(const Tensor& x);

// (n×c×h×w) -> (n×c), mean over the spatial extent.
Tensor avg_pool_global(const Tensor& x);

// Row gather on the first axis; backward scatter-adds.
Tensor select_rows(const Tensor& x, const std::vector<int>& rows);

// Scalar ops --------------------------------------------------------------

Tensor sum_all(const Tensor& x);

// sum_i weights[i]*x[i] -> scalar; weights are constants.
Tensor weighted_sum(const Tensor& x, std::span<const float> weights);

Tensor scale(const Tensor& x, float factor);

// Losses -------------------------------------------------------------------

// Mean over rows of -log softmax(logits)[label]. labels.size() == rows.
Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<int>& labels);

// Elementwise smooth-L1 (Huber, quadratic inside |e| < beta), summed and
// divided by normalizer. target is a constant of identical shape.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, float beta, float normalizer);

// Test diagnostics -----------------------------------------------------------

// Finite-difference checks are only valid along directions that do not
// cross a ReLU kink. When enabled, every relu() call folds its
// activation sign pattern into a thread-local hash; comparing hashes
// across perturbed evaluations detects any crossing exactly.
void relu_probe_reset(bool enabled);
uint64_t relu_probe_pattern();

// Optimizer -----------------------------------------------------------------

// One SGD step with momentum and weight decay on every parameter:
//   v <- momentum*v + grad + weight_decay*theta;  theta <- theta - lr*v
class SgdOptimizer {
  public:
    SgdOptimizer(std::vector<Tensor> params, float lr, float momentum, float weight_decay);

    void step();
    void zero_grad();
    void set_lr(float lr) { lr_ = lr; }
    float lr() const { return lr_; }

  private:
    struct Slot {
        Tensor param;
        std::vector<float> velocity;
    };
    std::vector<Slot> slots_;
    float lr_;
    float momentum_;
    float weight_decay_;
};

}  // namespace roiattn
