#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "roiattn/common.hpp"

namespace roiattn {

// Dense float32 tensor participating in reverse-mode differentiation.
// Copies are shallow handles to the same storage. A grad buffer of the
// same shape exists iff requires_grad is set. Zero extents are allowed
// so empty stacks (e.g. zero RoIs) are representable.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<float> values,
                              bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, double stdev,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return int(node_->shape.size()); }
    int dim(int i) const { return node_->shape[size_t(i)]; }
    int64_t numel() const { return int64_t(node_->value.size()); }

    // Handle semantics: a const Tensor is a const handle to shared,
    // mutable storage, so accessors stay const.
    float* data() const { return node_->value.data(); }
    const std::vector<float>& values() const { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool enabled) const;
    float* grad() const { return node_->grad.data(); }
    const std::vector<float>& grad_values() const { return node_->grad; }
    void zero_grad() const;

    // Single-element access for tests and small glue code.
    float at(std::initializer_list<int> idx) const;

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  private:
    struct Node {
        Shape shape;
        std::vector<float> value;
        std::vector<float> grad;
        bool requires_grad = false;
    };

    std::shared_ptr<Node> node_;
};

// Ordered record of executed operations (define-by-run). Each entry is a
// backward rule that accumulates into the gradients of the operation's
// inputs; replaying entries newest-first visits every node once in
// reverse topological order.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_rule) {
        entries_.push_back(std::move(backward_rule));
    }

    size_t size() const { return entries_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs all backward rules in reverse.
    // loss must be a scalar recorded under this tape.
    void backward(Tensor& loss);

    void clear() { entries_.clear(); }

    // Tape ops record onto, if any (thread-local).
    static Tape* current();

  private:
    friend class TapeScope;
    std::vector<std::function<void()>> entries_;
};

// RAII activation of a tape on the current thread.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

// Throws NumericError if any element is NaN/Inf. Every forward op calls
// this on its output; finite in, finite out is a contract.
void check_finite(const Tensor& t, const char* op_name);

}  // namespace roiattn
