#pragma once

#include <span>
#include <vector>

#include "msa/rng.hpp"
#include "msa/tensor.hpp"

namespace msa {

enum class Act { relu, sigmoid, tanh };
enum class InitScheme { kaiming, xavier, zeros };

// Lower bound applied to probabilities before any log.
inline constexpr double kProbFloor = 1e-12;

// Parameter initialization from a named stream. Deterministic given
// (scheme, shape, stream seed/name/cursor).
template <typename T>
Tensor<T> init_param(const Shape& shape, InitScheme scheme, RngStream& stream);

// --- differentiable ops ---------------------------------------------------
// Every op records a backward rule on the thread-local active tape when any
// input requires grad. Without an active tape they are plain forward math.

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding);

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Act kind);

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return activation(x, Act::relu);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return activation(x, Act::sigmoid);
}
template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
    return activation(x, Act::tanh);
}

// Softmax over the last axis, max-subtracted for stability.
template <typename T>
Tensor<T> softmax(const Tensor<T>& input);

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int window);

template <typename T>
Tensor<T> global_avg_pool2d(const Tensor<T>& input);

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape target);

template <typename T>
Tensor<T> flatten_from(const Tensor<T>& input, int axis);

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> inputs, int axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& input, int axis, std::int64_t start, std::int64_t length);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double c);

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, double lo, double hi);

// Natural log; inputs must be positive (clamp first).
template <typename T>
Tensor<T> log_op(const Tensor<T>& x);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Mean over the batch of -log softmax(logits)[label]. Stable log-sum-exp.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

// out[b,:] = weight[:, cols[b]]; scatter-add on backward. Used by the CAM.
template <typename T>
Tensor<T> select_columns(const Tensor<T>& weight, const std::vector<int>& cols);

// out[b,0,h,w] = sum_c vec[b,c] * feat[b,c,h,w]
template <typename T>
Tensor<T> channel_dot(const Tensor<T>& feat, const Tensor<T>& vec);

// out[b,c,h,w] = feat[b,c,h,w] * map[b,0,h,w]
template <typename T>
Tensor<T> mul_channel_broadcast(const Tensor<T>& feat, const Tensor<T>& map);

// Copy of x that does not participate in autodiff (gradient barrier).
template <typename T>
Tensor<T> detach(const Tensor<T>& x);

extern template Tensor<float> init_param<float>(const Shape&, InitScheme, RngStream&);
extern template Tensor<double> init_param<double>(const Shape&, InitScheme, RngStream&);

}  // namespace msa
