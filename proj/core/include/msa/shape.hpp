#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msa {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Pure shape inference, kept apart from the op implementations so tests can
// cross-check predicted shapes against actual op outputs. Throws ShapeError /
// GeometryError on the same conditions the ops do.
namespace shapes {

Shape conv2d(const Shape& input, const Shape& weight, int stride, int padding);
Shape linear(const Shape& input, const Shape& weight);
Shape avg_pool2d(const Shape& input, int window);
Shape global_avg_pool2d(const Shape& input);
Shape reshape(const Shape& input, const Shape& target);
Shape concat(const std::vector<Shape>& inputs, int axis);
Shape slice(const Shape& input, int axis, std::int64_t start, std::int64_t length);
Shape flatten_from(const Shape& input, int axis);

}  // namespace shapes
}  // namespace msa
