#pragma once

#include <vector>

#include "msa/image.hpp"

namespace msa {

// Dense per-pixel displacement field: a(p) corresponds to b(p + (u(p), v(p))).
struct FlowField {
    int h = 0, w = 0;
    std::vector<float> u, v;
    std::vector<std::uint8_t> valid;  // 0 marks pixels excluded from stats

    FlowField() = default;
    FlowField(int hh, int ww)
        : h(hh),
          w(ww),
          u(static_cast<std::size_t>(hh) * ww, 0.f),
          v(static_cast<std::size_t>(hh) * ww, 0.f),
          valid(static_cast<std::size_t>(hh) * ww, 1) {}

    std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * w + x; }
};

struct FlowParams {
    int levels = 3;   // pyramid levels incl. full resolution
    int block = 7;    // matching window (odd)
    int search = 3;   // +/- search radius per level, in pixels
};

// Coarse-to-fine block-matching flow with parabolic subpixel refinement.
// Fully deterministic: ties resolved toward the smaller displacement.
FlowField dense_flow(const ImageF& a, const ImageF& b, const FlowParams& params = {});

// Bilinear flow sample; returns (u,v) at a subpixel location.
Vec2 sample_flow(const FlowField& f, double y, double x);

// Angle/magnitude encoding: c1=(cos t +1)/2, c2=(sin t +1)/2, c3=min(|f|/m_max,1).
// Zero-magnitude pixels map to (0.5, 0.5, 0).
ImageRGB encode_flow_rgb(const FlowField& flow, float m_max);

}  // namespace msa
