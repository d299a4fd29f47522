#include "msa/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "msa/parallel.hpp"

namespace msa {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapC = Eigen::Map<const MatRM<T>>;

// C[m,n] = or += A[m,k] * B[k,n]. Rows of C are statically partitioned across
// workers, so each element is produced by exactly one fixed-order kernel run.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1, int) {
        MapC<T> A(a + r0 * k, r1 - r0, k);
        MapC<T> B(b, k, n);
        MapM<T> C(c + r0 * n, r1 - r0, n);
        if (accumulate)
            C.noalias() += A * B;
        else
            C.noalias() = A * B;
    });
}

// C[m,n] = or += A^T * B with A stored as [k,m].
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1, int) {
        MapC<T> A(a, k, m);
        MapC<T> B(b, k, n);
        MapM<T> C(c + r0 * n, r1 - r0, n);
        if (accumulate)
            C.noalias() += A.middleCols(r0, r1 - r0).transpose() * B;
        else
            C.noalias() = A.middleCols(r0, r1 - r0).transpose() * B;
    });
}

// C[m,n] = or += A * B^T with B stored as [n,k].
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1, int) {
        MapC<T> A(a + r0 * k, r1 - r0, k);
        MapC<T> B(b, n, k);
        MapM<T> C(c + r0 * n, r1 - r0, n);
        if (accumulate)
            C.noalias() += A * B.transpose();
        else
            C.noalias() = A * B.transpose();
    });
}

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> ts) {
    for (auto* t : ts)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

// Shared tail of every op: validate, and record the backward rule when an
// active tape and a grad-requiring input are present.
template <typename T>
void finish_op(const char* name, Tensor<T>& out,
               std::initializer_list<const Tensor<T>*> inputs,
               std::function<void()> backward) {
    Tape<T>* tape = active_tape<T>();
    if (!tape || !any_requires_grad<T>(inputs)) return;
    if (tape->check_finite() && !out.all_finite())
        throw NumericError(std::string("non-finite values in output of op '") + name + "'" +
                           (out.label().empty() ? "" : " (" + out.label() + ")"));
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorNode<T>>> in_nodes;
    in_nodes.reserve(inputs.size());
    for (auto* t : inputs)
        if (t->defined()) in_nodes.push_back(t->node());
    tape->record(name, std::move(in_nodes), out.node(), std::move(backward));
}

template <typename T>
void check_finite_forward(const char* name, const Tensor<T>& out) {
    Tape<T>* tape = active_tape<T>();
    if (tape && tape->check_finite() && !out.all_finite())
        throw NumericError(std::string("non-finite values in output of op '") + name + "'");
}

struct ConvDims {
    std::int64_t n, c, h, w, o, k, oh, ow, p, ckk;
    int stride, pad;
};

ConvDims conv_dims(const Shape& in, const Shape& wt, int stride, int padding) {
    if (in.size() != 4) throw ShapeError("conv2d input must be NCHW, got " + shape_str(in));
    if (wt.size() != 4) throw ShapeError("conv2d weight must be OCKK, got " + shape_str(wt));
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d padding must be >= 0");
    if (wt[1] != in[1])
        throw ShapeError("conv2d channel mismatch: input " + shape_str(in) + " weight " +
                         shape_str(wt));
    if (wt[2] != wt[3]) throw ShapeError("conv2d kernel must be square, got " + shape_str(wt));
    ConvDims d;
    d.n = in[0];
    d.c = in[1];
    d.h = in[2];
    d.w = in[3];
    d.o = wt[0];
    d.k = wt[2];
    d.stride = stride;
    d.pad = padding;
    d.oh = (d.h + 2 * padding - d.k) / stride + 1;
    d.ow = (d.w + 2 * padding - d.k) / stride + 1;
    if (d.h + 2 * padding < d.k || d.w + 2 * padding < d.k || d.oh < 1 || d.ow < 1)
        throw GeometryError("conv2d output extent < 1 for input " + shape_str(in));
    d.p = d.oh * d.ow;
    d.ckk = d.c * d.k * d.k;
    return d;
}

// col[(n*P + oy*OW + ox), (c*K + kh)*K + kw] = x[n,c,oy*s-pad+kh,ox*s-pad+kw]
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
    parallel_for(d.n * d.p, [&](std::int64_t r0, std::int64_t r1, int) {
        for (std::int64_t r = r0; r < r1; ++r) {
            const std::int64_t n = r / d.p;
            const std::int64_t p = r % d.p;
            const std::int64_t oy = p / d.ow, ox = p % d.ow;
            T* dst = col + r * d.ckk;
            const T* src_n = x + n * d.c * d.h * d.w;
            for (std::int64_t c = 0; c < d.c; ++c) {
                const T* src_c = src_n + c * d.h * d.w;
                for (std::int64_t kh = 0; kh < d.k; ++kh) {
                    const std::int64_t iy = oy * d.stride - d.pad + kh;
                    for (std::int64_t kw = 0; kw < d.k; ++kw) {
                        const std::int64_t ix = ox * d.stride - d.pad + kw;
                        *dst++ = (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                                     ? src_c[iy * d.w + ix]
                                     : T(0);
                    }
                }
            }
        }
    });
}

// Scatter-add of dcol back into dx; samples are independent.
template <typename T>
void col2im_add(const T* dcol, const ConvDims& d, T* dx) {
    parallel_for(d.n, [&](std::int64_t n0, std::int64_t n1, int) {
        for (std::int64_t n = n0; n < n1; ++n) {
            T* dst_n = dx + n * d.c * d.h * d.w;
            for (std::int64_t p = 0; p < d.p; ++p) {
                const T* src = dcol + (n * d.p + p) * d.ckk;
                const std::int64_t oy = p / d.ow, ox = p % d.ow;
                for (std::int64_t c = 0; c < d.c; ++c) {
                    T* dst_c = dst_n + c * d.h * d.w;
                    for (std::int64_t kh = 0; kh < d.k; ++kh) {
                        const std::int64_t iy = oy * d.stride - d.pad + kh;
                        for (std::int64_t kw = 0; kw < d.k; ++kw) {
                            const std::int64_t ix = ox * d.stride - d.pad + kw;
                            if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                                dst_c[iy * d.w + ix] += *src;
                            ++src;
                        }
                    }
                }
            }
        }
    });
}

}  // namespace

template <typename T>
Tensor<T> init_param(const Shape& shape, InitScheme scheme, RngStream& stream) {
    if (shape.empty()) throw ShapeError("init_param: shape must be non-empty");
    for (auto e : shape)
        if (e < 1) throw ShapeError("init_param: invalid shape " + shape_str(shape));
    Tensor<T> t = Tensor<T>::zeros(shape);
    if (scheme == InitScheme::zeros) return t;

    std::int64_t fan_in = shape[0], fan_out = shape.size() > 1 ? shape[1] : shape[0];
    if (shape.size() == 2) {
        fan_in = shape[0];  // weight is [D,K]
        fan_out = shape[1];
    } else if (shape.size() == 4) {
        fan_in = shape[1] * shape[2] * shape[3];  // OCKK
        fan_out = shape[0] * shape[2] * shape[3];
    }
    auto vals = t.data_mut();
    if (scheme == InitScheme::kaiming) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (auto& v : vals) v = static_cast<T>(stream.normal() * std_dev);
    } else {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : vals) v = static_cast<T>(stream.uniform(-a, a));
    }
    return t;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding) {
    const ConvDims d = conv_dims(input.shape(), weight.shape(), stride, padding);
    if (!bias.defined() || bias.shape() != Shape{d.o})
        throw ShapeError("conv2d bias must be [O]");

    auto col = std::make_shared<std::vector<T>>(static_cast<std::size_t>(d.n * d.p * d.ckk));
    im2col(input.data().data(), d, col->data());

    // y2[(n,p), o] = col x W^T, then transpose into NCHW and add bias
    std::vector<T> y2(static_cast<std::size_t>(d.n * d.p * d.o));
    gemm_nt<T>(col->data(), weight.data().data(), y2.data(), d.n * d.p, d.ckk, d.o, false);

    Tensor<T> out = Tensor<T>::zeros({d.n, d.o, d.oh, d.ow});
    auto* ov = out.data_mut().data();
    const T* bv = bias.data().data();
    parallel_for(d.n, [&](std::int64_t n0, std::int64_t n1, int) {
        for (std::int64_t n = n0; n < n1; ++n)
            for (std::int64_t o = 0; o < d.o; ++o) {
                T* dst = ov + (n * d.o + o) * d.p;
                const T* src = y2.data() + n * d.p * d.o + o;
                const T b = bv[o];
                for (std::int64_t p = 0; p < d.p; ++p) dst[p] = src[p * d.o] + b;
            }
    });

    auto xn = input.node(), wn = weight.node(), bn = bias.node(), on = out.node();
    finish_op<T>("conv2d", out, {&input, &weight, &bias}, [xn, wn, bn, on, col, d]() {
        // dy back to (n*p, o) layout
        std::vector<T> dy2(static_cast<std::size_t>(d.n * d.p * d.o));
        const T* g = on->grad.data();
        parallel_for(d.n, [&](std::int64_t n0, std::int64_t n1, int) {
            for (std::int64_t n = n0; n < n1; ++n)
                for (std::int64_t o = 0; o < d.o; ++o) {
                    const T* src = g + (n * d.o + o) * d.p;
                    T* dst = dy2.data() + n * d.p * d.o + o;
                    for (std::int64_t p = 0; p < d.p; ++p) dst[p * d.o] = src[p];
                }
        });
        if (bn->requires_grad) {
            T* db = bn->grad.data();
            for (std::int64_t r = 0; r < d.n * d.p; ++r) {
                const T* row = dy2.data() + r * d.o;
                for (std::int64_t o = 0; o < d.o; ++o) db[o] += row[o];
            }
        }
        if (wn->requires_grad)
            gemm_tn<T>(dy2.data(), col->data(), wn->grad.data(), d.o, d.n * d.p, d.ckk, true);
        if (xn->requires_grad) {
            std::vector<T> dcol(static_cast<std::size_t>(d.n * d.p * d.ckk));
            gemm_nn<T>(dy2.data(), wn->value.data(), dcol.data(), d.n * d.p, d.o, d.ckk, false);
            col2im_add(dcol.data(), d, xn->grad.data());
        }
    });
    return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[0])
        throw ShapeError("linear: need [B,D] x [D,K], got " + shape_str(xs) + " x " +
                         shape_str(ws));
    const std::int64_t b = xs[0], dd = xs[1], k = ws[1];
    if (!bias.defined() || bias.shape() != Shape{k}) throw ShapeError("linear bias must be [K]");

    Tensor<T> out = Tensor<T>::zeros({b, k});
    gemm_nn<T>(input.data().data(), weight.data().data(), out.data_mut().data(), b, dd, k, false);
    auto* ov = out.data_mut().data();
    const T* bv = bias.data().data();
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t j = 0; j < k; ++j) ov[r * k + j] += bv[j];

    auto xn = input.node(), wn = weight.node(), bn = bias.node(), on = out.node();
    finish_op<T>("linear", out, {&input, &weight, &bias}, [xn, wn, bn, on, b, dd, k]() {
        const T* g = on->grad.data();
        if (bn->requires_grad) {
            T* db = bn->grad.data();
            for (std::int64_t r = 0; r < b; ++r)
                for (std::int64_t j = 0; j < k; ++j) db[j] += g[r * k + j];
        }
        if (wn->requires_grad)
            gemm_tn<T>(xn->value.data(), g, wn->grad.data(), dd, b, k, true);
        if (xn->requires_grad)
            gemm_nt<T>(g, wn->value.data(), xn->grad.data(), b, k, dd, true);
    });
    return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Act kind) {
    Tensor<T> out = Tensor<T>::zeros(input.shape());
    const auto x = input.data();
    auto y = out.data_mut();
    const std::int64_t n = input.numel();
    parallel_for(n, [&](std::int64_t i0, std::int64_t i1, int) {
        switch (kind) {
            case Act::relu:
                for (std::int64_t i = i0; i < i1; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
                break;
            case Act::sigmoid:
                for (std::int64_t i = i0; i < i1; ++i)
                    y[i] = T(1) / (T(1) + std::exp(-x[i]));
                break;
            case Act::tanh:
                for (std::int64_t i = i0; i < i1; ++i) y[i] = std::tanh(x[i]);
                break;
        }
    });
    const char* name = kind == Act::relu ? "relu" : (kind == Act::sigmoid ? "sigmoid" : "tanh");
    auto xn = input.node(), on = out.node();
    finish_op<T>(name, out, {&input}, [xn, on, kind, n]() {
        if (!xn->requires_grad) return;
        const T* g = on->grad.data();
        const T* xv = xn->value.data();
        const T* yv = on->value.data();
        T* dx = xn->grad.data();
        switch (kind) {
            case Act::relu:
                // subgradient at 0 is 0
                for (std::int64_t i = 0; i < n; ++i)
                    if (xv[i] > T(0)) dx[i] += g[i];
                break;
            case Act::sigmoid:
                for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * yv[i] * (T(1) - yv[i]);
                break;
            case Act::tanh:
                for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * (T(1) - yv[i] * yv[i]);
                break;
        }
    });
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& input) {
    const Shape& s = input.shape();
    if (s.empty()) throw ShapeError("softmax: input must have rank >= 1");
    const std::int64_t k = s.back();
    const std::int64_t rows = input.numel() / k;
    Tensor<T> out = Tensor<T>::zeros(s);
    const T* x = input.data().data();
    T* y = out.data_mut().data();
    parallel_for(rows, [&](std::int64_t r0, std::int64_t r1, int) {
        for (std::int64_t r = r0; r < r1; ++r) {
            const T* xr = x + r * k;
            T* yr = y + r * k;
            T m = xr[0];
            for (std::int64_t j = 1; j < k; ++j) m = std::max(m, xr[j]);
            T z = T(0);
            for (std::int64_t j = 0; j < k; ++j) {
                yr[j] = std::exp(xr[j] - m);
                z += yr[j];
            }
            const T inv = T(1) / z;
            for (std::int64_t j = 0; j < k; ++j) yr[j] *= inv;
        }
    });
    auto xn = input.node(), on = out.node();
    finish_op<T>("softmax", out, {&input}, [xn, on, rows, k]() {
        if (!xn->requires_grad) return;
        const T* g = on->grad.data();
        const T* yv = on->value.data();
        T* dx = xn->grad.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* gr = g + r * k;
            const T* yr = yv + r * k;
            T dot = T(0);
            for (std::int64_t j = 0; j < k; ++j) dot += gr[j] * yr[j];
            T* dr = dx + r * k;
            for (std::int64_t j = 0; j < k; ++j) dr[j] += yr[j] * (gr[j] - dot);
        }
    });
    return out;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int window) {
    const Shape& s = input.shape();
    if (s.size() != 4) throw ShapeError("avg_pool2d input must be NCHW");
    if (window < 1) throw ShapeError("avg_pool2d window must be >= 1");
    if (window > s[2] || window > s[3])
        throw GeometryError("avg_pool2d window larger than input " + shape_str(s));
    if (s[2] % window != 0 || s[3] % window != 0)
        throw ShapeError("avg_pool2d window must divide spatial extents");
    const std::int64_t n = s[0], c = s[1], h = s[2], w = s[3];
    const std::int64_t oh = h / window, ow = w / window;
    Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
    const T* x = input.data().data();
    T* y = out.data_mut().data();
    const T inv = T(1) / static_cast<T>(window * window);
    parallel_for(n * c, [&](std::int64_t i0, std::int64_t i1, int) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const T* xp = x + i * h * w;
            T* yp = y + i * oh * ow;
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    T acc = T(0);
                    for (int dy = 0; dy < window; ++dy)
                        for (int dx = 0; dx < window; ++dx)
                            acc += xp[(oy * window + dy) * w + ox * window + dx];
                    yp[oy * ow + ox] = acc * inv;
                }
        }
    });
    auto xn = input.node(), on = out.node();
    finish_op<T>("avg_pool2d", out, {&input}, [xn, on, n, c, h, w, oh, ow, window, inv]() {
        if (!xn->requires_grad) return;
        const T* g = on->grad.data();
        T* dx = xn->grad.data();
        for (std::int64_t i = 0; i < n * c; ++i) {
            const T* gp = g + i * oh * ow;
            T* dp = dx + i * h * w;
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    const T gi = gp[oy * ow + ox] * inv;
                    for (int dy = 0; dy < window; ++dy)
                        for (int dxq = 0; dxq < window; ++dxq)
                            dp[(oy * window + dy) * w + ox * window + dxq] += gi;
                }
        }
    });
    return out;
}

template <typename T>
Tensor<T> global_avg_pool2d(const Tensor<T>& input) {
    const Shape& s = input.shape();
    if (s.size() != 4) throw ShapeError("global_avg_pool2d input must be NCHW");
    const std::int64_t n = s[0], c = s[1], hw = s[2] * s[3];
    Tensor<T> out = Tensor<T>::zeros({n, c, 1, 1});
    const T* x = input.data().data();
    T* y = out.data_mut().data();
    const T inv = T(1) / static_cast<T>(hw);
    for (std::int64_t i = 0; i < n * c; ++i) {
        T acc = T(0);
        const T* xp = x + i * hw;
        for (std::int64_t j = 0; j < hw; ++j) acc += xp[j];
        y[i] = acc * inv;
    }
    auto xn = input.node(), on = out.node();
    finish_op<T>("global_avg_pool2d", out, {&input}, [xn, on, n, c, hw, inv]() {
        if (!xn->requires_grad) return;
        const T* g = on->grad.data();
        T* dx = xn->grad.data();
        for (std::int64_t i = 0; i < n * c; ++i) {
            const T gi = g[i] * inv;
            T* dp = dx + i * hw;
            for (std::int64_t j = 0; j < hw; ++j) dp[j] += gi;
        }
    });
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape target) {
    if (msa::numel(target) != input.numel())
        throw ShapeError("reshape element count mismatch: " + shape_str(input.shape()) + " -> " +
                         shape_str(target));
    Tensor<T> out = Tensor<T>::from_data(std::move(target),
                                         std::vector<T>(input.data().begin(), input.data().end()));
    auto xn = input.node(), on = out.node();
    finish_op<T>("reshape", out, {&input}, [xn, on]() {
        if (!xn->requires_grad) return;
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
    return out;
}

template <typename T>
Tensor<T> flatten_from(const Tensor<T>& input, int axis) {
    return reshape(input, shapes::flatten_from(input.shape(), axis));
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> inputs, int axis) {
    if (inputs.empty()) throw ShapeError("concat needs at least one input");
    std::vector<Shape> in_shapes;
    for (const auto& t : inputs) in_shapes.push_back(t.shape());
    const Shape out_shape = shapes::concat(in_shapes, axis);
    Tensor<T> out = Tensor<T>::zeros(out_shape);

    const std::int64_t rank = static_cast<std::int64_t>(out_shape.size());
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t d = 0; d < axis; ++d) outer *= out_shape[d];
    for (std::int64_t d = axis + 1; d < rank; ++d) inner *= out_shape[d];

    T* y = out.data_mut().data();
    const std::int64_t out_axis = out_shape[axis];
    std::int64_t off = 0;
    std::vector<std::int64_t> offsets;
    for (const auto& t : inputs) {
        offsets.push_back(off);
        const std::int64_t a = t.shape()[axis];
        const T* x = t.data().data();
        for (std::int64_t u = 0; u < outer; ++u)
            std::memcpy(y + (u * out_axis + off) * inner, x + u * a * inner,
                        static_cast<std::size_t>(a * inner) * sizeof(T));
        off += a;
    }

    std::vector<std::shared_ptr<TensorNode<T>>> in_nodes;
    std::vector<std::int64_t> axes;
    bool rec = false;
    for (const auto& t : inputs) {
        in_nodes.push_back(t.node());
        axes.push_back(t.shape()[axis]);
        rec = rec || t.requires_grad();
    }
    Tape<T>* tape = active_tape<T>();
    if (tape && rec) {
        out.set_requires_grad(true);
        auto on = out.node();
        tape->record("concat", in_nodes, on,
                     [in_nodes, on, offsets, axes, outer, inner, out_axis]() {
                         const T* g = on->grad.data();
                         for (std::size_t i = 0; i < in_nodes.size(); ++i) {
                             if (!in_nodes[i]->requires_grad) continue;
                             T* dx = in_nodes[i]->grad.data();
                             for (std::int64_t u = 0; u < outer; ++u) {
                                 const T* gp = g + (u * out_axis + offsets[i]) * inner;
                                 T* dp = dx + u * axes[i] * inner;
                                 for (std::int64_t j = 0; j < axes[i] * inner; ++j) dp[j] += gp[j];
                             }
                         }
                     });
    }
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& input, int axis, std::int64_t start, std::int64_t length) {
    const Shape out_shape = shapes::slice(input.shape(), axis, start, length);
    const Shape& s = input.shape();
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const std::int64_t in_axis = s[axis];

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const T* x = input.data().data();
    T* y = out.data_mut().data();
    for (std::int64_t u = 0; u < outer; ++u)
        std::memcpy(y + u * length * inner, x + (u * in_axis + start) * inner,
                    static_cast<std::size_t>(length * inner) * sizeof(T));

    auto xn = input.node(), on = out.node();
    finish_op<T>("slice", out, {&input}, [xn, on, outer, inner, in_axis, start, length]() {
        if (!xn->requires_grad) return;
        const T* g = on->grad.data();
        T* dx = xn->grad.data();
        for (std::int64_t u = 0; u < outer; ++u) {
            const T* gp = g + u * length * inner;
            T* dp = dx + (u * in_axis + start) * inner;
            for (std::int64_t j = 0; j < length * inner; ++j) dp[j] += gp[j];
        }
    });
    return out;
}

namespace {

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> elementwise_binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd,
                             BwdFn bwd) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* av = a.data().data();
    const T* bv = b.data().data();
    T* y = out.data_mut().data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = fwd(av[i], bv[i]);
    auto an = a.node(), bn = b.node(), on = out.node();
    finish_op<T>(name, out, {&a, &b}, [an, bn, on, n, bwd]() {
        const T* g = on->grad.data();
        for (std::int64_t i = 0; i < n; ++i) {
            const auto [da, db] = bwd(an->value[i], bn->value[i], g[i]);
            if (an->requires_grad) an->grad[i] += da;
            if (bn->requires_grad) bn->grad[i] += db;
        }
    });
    return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise_binary<T>(
        "add", a, b, [](T x, T y) { return x + y; },
        [](T, T, T g) { return std::pair<T, T>(g, g); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise_binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; },
        [](T, T, T g) { return std::pair<T, T>(g, -g); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise_binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; },
        [](T x, T y, T g) { return std::pair<T, T>(g * y, g * x); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T cc = static_cast<T>(c);
    const T* xv = x.data().data();
    T* y = out.data_mut().data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = xv[i] * cc;
    auto xn = x.node(), on = out.node();
    finish_op<T>("scale", out, {&x}, [xn, on, n, cc]() {
        if (!xn->requires_grad) return;
        for (std::int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * cc;
    });
    return out;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp: lo > hi");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T l = static_cast<T>(lo), h = static_cast<T>(hi);
    const T* xv = x.data().data();
    T* y = out.data_mut().data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = std::min(std::max(xv[i], l), h);
    auto xn = x.node(), on = out.node();
    finish_op<T>("clamp", out, {&x}, [xn, on, n, l, h]() {
        if (!xn->requires_grad) return;
        for (std::int64_t i = 0; i < n; ++i)
            if (xn->value[i] >= l && xn->value[i] <= h) xn->grad[i] += on->grad[i];
    });
    return out;
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xv = x.data().data();
    T* y = out.data_mut().data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        if (!(xv[i] > T(0)))
            throw NumericError("log of non-positive value; clamp inputs first");
        y[i] = std::log(xv[i]);
    }
    auto xn = x.node(), on = out.node();
    finish_op<T>("log", out, {&x}, [xn, on, n]() {
        if (!xn->requires_grad) return;
        for (std::int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] / xn->value[i];
    });
    return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    auto xn = x.node(), on = out.node();
    finish_op<T>("sum", out, {&x}, [xn, on]() {
        if (!xn->requires_grad) return;
        const T g = on->grad[0];
        for (auto& d : xn->grad) d += g;
    });
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    const T inv = T(1) / static_cast<T>(x.numel());
    Tensor<T> out = Tensor<T>::scalar(acc * inv);
    auto xn = x.node(), on = out.node();
    finish_op<T>("mean", out, {&x}, [xn, on, inv]() {
        if (!xn->requires_grad) return;
        const T g = on->grad[0] * inv;
        for (auto& d : xn->grad) d += g;
    });
    return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw ShapeError("softmax_cross_entropy: logits must be [B,C]");
    const std::int64_t b = s[0], c = s[1];
    if (static_cast<std::int64_t>(labels.size()) != b)
        throw ShapeError("softmax_cross_entropy: labels length must equal batch");
    for (int y : labels)
        if (y < 0 || y >= c)
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(c) + " classes");

    auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(b * c));
    T total = T(0);
    const T* x = logits.data().data();
    for (std::int64_t r = 0; r < b; ++r) {
        const T* xr = x + r * c;
        T m = xr[0];
        for (std::int64_t j = 1; j < c; ++j) m = std::max(m, xr[j]);
        T z = T(0);
        for (std::int64_t j = 0; j < c; ++j) {
            const T e = std::exp(xr[j] - m);
            (*probs)[r * c + j] = e;
            z += e;
        }
        const T inv = T(1) / z;
        for (std::int64_t j = 0; j < c; ++j) (*probs)[r * c + j] *= inv;
        total += (m + std::log(z)) - xr[labels[r]];
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(b));

    auto xn = logits.node(), on = out.node();
    finish_op<T>("softmax_cross_entropy", out, {&logits}, [xn, on, probs, labels, b, c]() {
        if (!xn->requires_grad) return;
        const T g = on->grad[0] / static_cast<T>(b);
        T* dx = xn->grad.data();
        for (std::int64_t r = 0; r < b; ++r)
            for (std::int64_t j = 0; j < c; ++j) {
                T p = (*probs)[r * c + j];
                if (j == labels[r]) p -= T(1);
                dx[r * c + j] += g * p;
            }
    });
    return out;
}

template <typename T>
Tensor<T> select_columns(const Tensor<T>& weight, const std::vector<int>& cols) {
    const Shape& s = weight.shape();
    if (s.size() != 2) throw ShapeError("select_columns: weight must be [D,K]");
    const std::int64_t d = s[0], k = s[1];
    for (int cidx : cols)
        if (cidx < 0 || cidx >= k) throw std::out_of_range("select_columns: column out of range");
    const std::int64_t b = static_cast<std::int64_t>(cols.size());
    Tensor<T> out = Tensor<T>::zeros({b, d});
    const T* w = weight.data().data();
    T* y = out.data_mut().data();
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t i = 0; i < d; ++i) y[r * d + i] = w[i * k + cols[r]];
    auto wn = weight.node(), on = out.node();
    finish_op<T>("select_columns", out, {&weight}, [wn, on, cols, d, k]() {
        if (!wn->requires_grad) return;
        const T* g = on->grad.data();
        T* dw = wn->grad.data();
        for (std::size_t r = 0; r < cols.size(); ++r)
            for (std::int64_t i = 0; i < d; ++i) dw[i * k + cols[r]] += g[r * d + i];
    });
    return out;
}

template <typename T>
Tensor<T> channel_dot(const Tensor<T>& feat, const Tensor<T>& vec) {
    const Shape& fs = feat.shape();
    const Shape& vs = vec.shape();
    if (fs.size() != 4 || vs.size() != 2 || fs[0] != vs[0] || fs[1] != vs[1])
        throw ShapeError("channel_dot: need feat [B,C,H,W] and vec [B,C]");
    const std::int64_t b = fs[0], c = fs[1], hw = fs[2] * fs[3];
    Tensor<T> out = Tensor<T>::zeros({b, 1, fs[2], fs[3]});
    const T* f = feat.data().data();
    const T* v = vec.data().data();
    T* y = out.data_mut().data();
    for (std::int64_t n = 0; n < b; ++n)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T vv = v[n * c + ch];
            const T* fp = f + (n * c + ch) * hw;
            T* yp = y + n * hw;
            for (std::int64_t p = 0; p < hw; ++p) yp[p] += vv * fp[p];
        }
    auto fn = feat.node(), vn = vec.node(), on = out.node();
    finish_op<T>("channel_dot", out, {&feat, &vec}, [fn, vn, on, b, c, hw]() {
        const T* g = on->grad.data();
        for (std::int64_t n = 0; n < b; ++n)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* gp = g + n * hw;
                const std::int64_t base = (n * c + ch) * hw;
                if (fn->requires_grad) {
                    const T vv = vn->value[n * c + ch];
                    for (std::int64_t p = 0; p < hw; ++p) fn->grad[base + p] += vv * gp[p];
                }
                if (vn->requires_grad) {
                    T acc = T(0);
                    for (std::int64_t p = 0; p < hw; ++p) acc += fn->value[base + p] * gp[p];
                    vn->grad[n * c + ch] += acc;
                }
            }
    });
    return out;
}

template <typename T>
Tensor<T> mul_channel_broadcast(const Tensor<T>& feat, const Tensor<T>& map) {
    const Shape& fs = feat.shape();
    const Shape& ms = map.shape();
    if (fs.size() != 4 || ms.size() != 4 || ms[1] != 1 || fs[0] != ms[0] || fs[2] != ms[2] ||
        fs[3] != ms[3])
        throw ShapeError("mul_channel_broadcast: need feat [B,C,H,W] and map [B,1,H,W]");
    const std::int64_t b = fs[0], c = fs[1], hw = fs[2] * fs[3];
    Tensor<T> out = Tensor<T>::zeros(fs);
    const T* f = feat.data().data();
    const T* m = map.data().data();
    T* y = out.data_mut().data();
    for (std::int64_t n = 0; n < b; ++n)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* mp = m + n * hw;
            const std::int64_t base = (n * c + ch) * hw;
            for (std::int64_t p = 0; p < hw; ++p) y[base + p] = f[base + p] * mp[p];
        }
    auto fn = feat.node(), mn = map.node(), on = out.node();
    finish_op<T>("mul_channel_broadcast", out, {&feat, &map}, [fn, mn, on, b, c, hw]() {
        const T* g = on->grad.data();
        for (std::int64_t n = 0; n < b; ++n)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const std::int64_t base = (n * c + ch) * hw;
                const T* mp = mn->value.data() + n * hw;
                if (fn->requires_grad)
                    for (std::int64_t p = 0; p < hw; ++p) fn->grad[base + p] += g[base + p] * mp[p];
                if (mn->requires_grad)
                    for (std::int64_t p = 0; p < hw; ++p)
                        mn->grad[n * hw + p] += g[base + p] * fn->value[base + p];
            }
    });
    return out;
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
    return Tensor<T>::from_data(x.shape(), std::vector<T>(x.data().begin(), x.data().end()));
}

#define MSA_INSTANTIATE_OPS(T)                                                                     \
    template Tensor<T> init_param<T>(const Shape&, InitScheme, RngStream&);                        \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
    template Tensor<T> activation<T>(const Tensor<T>&, Act);                                      \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                              \
    template Tensor<T> avg_pool2d<T>(const Tensor<T>&, int);                                      \
    template Tensor<T> global_avg_pool2d<T>(const Tensor<T>&);                                    \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                       \
    template Tensor<T> flatten_from<T>(const Tensor<T>&, int);                                    \
    template Tensor<T> concat<T>(std::span<const Tensor<T>>, int);                                \
    template Tensor<T> slice<T>(const Tensor<T>&, int, std::int64_t, std::int64_t);               \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> scale<T>(const Tensor<T>&, double);                                        \
    template Tensor<T> clamp<T>(const Tensor<T>&, double, double);                                \
    template Tensor<T> log_op<T>(const Tensor<T>&);                                               \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                  \
    template Tensor<T> mean<T>(const Tensor<T>&);                                                 \
    template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&, const std::vector<int>&);       \
    template Tensor<T> select_columns<T>(const Tensor<T>&, const std::vector<int>&);              \
    template Tensor<T> channel_dot<T>(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> mul_channel_broadcast<T>(const Tensor<T>&, const Tensor<T>&);              \
    template Tensor<T> detach<T>(const Tensor<T>&);

MSA_INSTANTIATE_OPS(float)
MSA_INSTANTIATE_OPS(double)

#undef MSA_INSTANTIATE_OPS

}  // namespace msa
