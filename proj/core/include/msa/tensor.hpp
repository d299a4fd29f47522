#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msa/error.hpp"
#include "msa/shape.hpp"

namespace msa {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

template <typename T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() {
    return Dtype::f32;
}
template <>
constexpr Dtype dtype_of<double>() {
    return Dtype::f64;
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // same length as value iff requires_grad
    bool requires_grad = false;
    std::string label;  // parameter name or op tag, for diagnostics
};

// Dense row-major tensor. Value semantics with shared storage: copies alias
// the same node, which is what the tape needs; use clone() for a deep copy.
// Values are immutable by convention once a tensor has entered the tape.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.n_ = std::make_shared<TensorNode<T>>();
        validate_shape(shape);
        t.n_->shape = std::move(shape);
        t.n_->value.assign(static_cast<std::size_t>(msa::numel(t.n_->shape)), T(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor full(Shape shape, T v) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.n_->value.begin(), t.n_->value.end(), v);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        validate_shape(shape);
        if (static_cast<std::int64_t>(data.size()) != msa::numel(shape))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t;
        t.n_ = std::make_shared<TensorNode<T>>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        return t;
    }

    static Tensor scalar(T v) { return from_data(Shape{}, std::vector<T>{v}); }

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(n_->value.size()); }
    Dtype dtype() const { return dtype_of<T>(); }

    std::span<const T> data() const { return {n_->value.data(), n_->value.size()}; }
    std::span<T> data_mut() { return {n_->value.data(), n_->value.size()}; }
    std::span<const T> grad() const { return {n_->grad.data(), n_->grad.size()}; }
    std::span<T> grad_mut() { return {n_->grad.data(), n_->grad.size()}; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) {
        n_->requires_grad = rg;
        if (rg && n_->grad.size() != n_->value.size()) n_->grad.assign(n_->value.size(), T(0));
        if (!rg) n_->grad.clear();
    }

    void zero_grad() {
        if (n_ && n_->requires_grad) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw ContractError("item() on tensor with " + std::to_string(numel()) +
                                              " elements");
        return n_->value[0];
    }

    T at(std::initializer_list<std::int64_t> idx) const {
        if (idx.size() != n_->shape.size()) throw ShapeError("at(): rank mismatch");
        std::int64_t flat = 0;
        std::size_t d = 0;
        for (auto i : idx) {
            if (i < 0 || i >= n_->shape[d]) throw ShapeError("at(): index out of bounds");
            flat = flat * n_->shape[d] + i;
            ++d;
        }
        return n_->value[static_cast<std::size_t>(flat)];
    }

    Tensor clone() const {
        Tensor t;
        t.n_ = std::make_shared<TensorNode<T>>(*n_);
        return t;
    }

    bool all_finite() const {
        for (T v : n_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    const std::string& label() const { return n_->label; }
    void set_label(std::string l) { n_->label = std::move(l); }

    std::shared_ptr<TensorNode<T>> node() const { return n_; }

    static Tensor wrap(std::shared_ptr<TensorNode<T>> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    static void validate_shape(const Shape& s) {
        for (auto e : s)
            if (e < 1) throw ShapeError("invalid shape " + shape_str(s) + " (zero or negative extent)");
    }

    std::shared_ptr<TensorNode<T>> n_;
};

enum class BackwardMode { single, accumulate };

// Wengert list. Ops executed inside a TapeScope append nodes in creation
// order; backward() replays them in reverse. Single-owner, not shareable
// across threads.
template <typename T>
class Tape {
public:
    struct Node {
        const char* op;
        std::vector<std::shared_ptr<TensorNode<T>>> inputs;
        std::shared_ptr<TensorNode<T>> output;
        std::function<void()> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const char* op, std::vector<std::shared_ptr<TensorNode<T>>> inputs,
                std::shared_ptr<TensorNode<T>> output, std::function<void()> backward) {
        nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
    }

    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.numel() != 1)
            throw ContractError("backward: loss must be a defined scalar tensor");
        if (ran_backward_ && mode_ == BackwardMode::single)
            throw ContractError("backward: tape already ran backward; reset() or use accumulate mode");
        auto loss_node = loss.node();
        bool on_tape = false;
        for (const auto& n : nodes_)
            if (n.output == loss_node) {
                on_tape = true;
                break;
            }
        if (!on_tape) throw ContractError("backward: loss is not an output recorded on this tape");
        if (ran_backward_) {
            // accumulate mode: intermediate grads are reset, leaf grads kept
            for (auto& n : nodes_)
                std::fill(n.output->grad.begin(), n.output->grad.end(), T(0));
        }
        loss_node->grad[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->backward) it->backward();
        ran_backward_ = true;
    }

    void reset() {
        nodes_.clear();
        ran_backward_ = false;
    }

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    void set_mode(BackwardMode m) { mode_ = m; }
    BackwardMode mode() const { return mode_; }

    void set_check_finite(bool b) { check_finite_ = b; }
    bool check_finite() const { return check_finite_; }

private:
    std::vector<Node> nodes_;
    bool ran_backward_ = false;
    BackwardMode mode_ = BackwardMode::single;
    bool check_finite_ = false;
};

template <typename T>
inline thread_local Tape<T>* g_active_tape = nullptr;

template <typename T>
Tape<T>* active_tape() {
    return g_active_tape<T>;
}

// RAII scope that makes a tape the recording target for the current thread.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& t) : prev_(g_active_tape<T>) { g_active_tape<T> = &t; }
    ~TapeScope() { g_active_tape<T> = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* prev_;
};

}  // namespace msa
