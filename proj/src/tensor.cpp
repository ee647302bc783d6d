#include "roiattn/tensor.hpp"

#include <cmath>

namespace roiattn {

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    for (int e : t.node_->shape) {
        if (e < 0) throw ShapeError("negative extent in shape " + shape_str(t.node_->shape));
    }
    t.node_->value.assign(size_t(shape_numel(t.node_->shape)), 0.0f);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->value) v = value;
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<float> values, bool requires_grad) {
    if (int64_t(values.size()) != shape_numel(shape)) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    Tensor t = zeros(std::move(shape), requires_grad);
    t.node_->value = std::move(values);
    return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stdev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->value) v = float(rng.normal(0.0, stdev));
    return t;
}

void Tensor::set_requires_grad(bool enabled) const {
    node_->requires_grad = enabled;
    if (enabled) {
        node_->grad.assign(node_->value.size(), 0.0f);
    } else {
        node_->grad.clear();
        node_->grad.shrink_to_fit();
    }
}

void Tensor::zero_grad() const {
    for (auto& g : node_->grad) g = 0.0f;
}

float Tensor::at(std::initializer_list<int> idx) const {
    if (idx.size() != node_->shape.size()) {
        throw ShapeError("index rank " + std::to_string(idx.size()) +
                         " vs tensor shape " + shape_str(node_->shape));
    }
    int64_t flat = 0;
    size_t d = 0;
    for (int i : idx) {
        flat = flat * node_->shape[d] + i;
        ++d;
    }
    return node_->value[size_t(flat)];
}

Tape* Tape::current() { return g_current_tape; }

void Tape::backward(Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " +
                         shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw ShapeError("backward on a tensor that was not recorded for gradients");
    }
    loss.grad()[0] = 1.0f;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }

TapeScope::~TapeScope() { g_current_tape = previous_; }

void check_finite(const Tensor& t, const char* op_name) {
    const float* v = t.data();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(std::string(op_name) + " produced a non-finite value at index " +
                               std::to_string(i));
        }
    }
}

}  // namespace roiattn
