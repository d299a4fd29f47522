#include "msa/shape.hpp"

#include <sstream>

#include "msa/error.hpp"

namespace msa {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace shapes {

namespace {
void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}
}  // namespace

Shape conv2d(const Shape& input, const Shape& weight, int stride, int padding) {
    require(input.size() == 4, "conv2d input must be NCHW, got " + shape_str(input));
    require(weight.size() == 4, "conv2d weight must be OCKK, got " + shape_str(weight));
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d padding must be >= 0");
    const auto c = input[1];
    require(weight[1] == c, "conv2d channel mismatch: input C=" + std::to_string(c) +
                                " weight C=" + std::to_string(weight[1]));
    require(weight[2] == weight[3], "conv2d kernel must be square, got " + shape_str(weight));
    const auto k = weight[2];
    const auto oh = (input[2] + 2 * padding - k) / stride + 1;
    const auto ow = (input[3] + 2 * padding - k) / stride + 1;
    if (input[2] + 2 * padding < k || input[3] + 2 * padding < k || oh < 1 || ow < 1)
        throw GeometryError("conv2d output extent < 1 for input " + shape_str(input) + " kernel " +
                            std::to_string(k));
    return {input[0], weight[0], oh, ow};
}

Shape linear(const Shape& input, const Shape& weight) {
    require(input.size() == 2, "linear input must be [B,D], got " + shape_str(input));
    require(weight.size() == 2, "linear weight must be [D,K], got " + shape_str(weight));
    require(input[1] == weight[0], "linear inner extent mismatch: " + shape_str(input) + " x " +
                                       shape_str(weight));
    return {input[0], weight[1]};
}

Shape avg_pool2d(const Shape& input, int window) {
    require(input.size() == 4, "avg_pool2d input must be NCHW, got " + shape_str(input));
    if (window < 1) throw ShapeError("avg_pool2d window must be >= 1");
    if (window > input[2] || window > input[3])
        throw GeometryError("avg_pool2d window " + std::to_string(window) + " larger than input " +
                            shape_str(input));
    require(input[2] % window == 0 && input[3] % window == 0,
            "avg_pool2d window must divide spatial extents of " + shape_str(input));
    return {input[0], input[1], input[2] / window, input[3] / window};
}

Shape global_avg_pool2d(const Shape& input) {
    require(input.size() == 4, "global_avg_pool2d input must be NCHW, got " + shape_str(input));
    return {input[0], input[1], 1, 1};
}

Shape reshape(const Shape& input, const Shape& target) {
    require(numel(input) == numel(target), "reshape element count mismatch: " + shape_str(input) +
                                               " -> " + shape_str(target));
    return target;
}

Shape concat(const std::vector<Shape>& inputs, int axis) {
    require(!inputs.empty(), "concat needs at least one input");
    Shape out = inputs[0];
    require(axis >= 0 && axis < static_cast<int>(out.size()), "concat axis out of range");
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        require(inputs[i].size() == out.size(), "concat rank mismatch");
        for (std::size_t d = 0; d < out.size(); ++d) {
            if (static_cast<int>(d) == axis) continue;
            require(inputs[i][d] == out[d], "concat non-axis extent mismatch at dim " +
                                                std::to_string(d));
        }
        out[axis] += inputs[i][axis];
    }
    return out;
}

Shape slice(const Shape& input, int axis, std::int64_t start, std::int64_t length) {
    require(axis >= 0 && axis < static_cast<int>(input.size()), "slice axis out of range");
    require(start >= 0 && length >= 1 && start + length <= input[axis],
            "slice range [" + std::to_string(start) + "," + std::to_string(start + length) +
                ") out of extent " + std::to_string(input[axis]));
    Shape out = input;
    out[axis] = length;
    return out;
}

Shape flatten_from(const Shape& input, int axis) {
    require(axis >= 0 && axis < static_cast<int>(input.size()), "flatten axis out of range");
    Shape out(input.begin(), input.begin() + axis);
    std::int64_t rest = 1;
    for (std::size_t d = axis; d < input.size(); ++d) rest *= input[d];
    out.push_back(rest);
    return out;
}

}  // namespace shapes
}  // namespace msa
