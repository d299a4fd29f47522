#include "msa/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msa/error.hpp"
#include "msa/parallel.hpp"

namespace msa {

namespace {

ImageF downsample_half(const ImageF& img) {
    const int oh = img.h / 2, ow = img.w / 2;
    ImageF out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(y, x) = 0.25f * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) +
                                    img.at(2 * y + 1, 2 * x) + img.at(2 * y + 1, 2 * x + 1));
    return out;
}

inline float pix(const ImageF& img, int y, int x) {
    y = std::clamp(y, 0, img.h - 1);
    x = std::clamp(x, 0, img.w - 1);
    return img.at(y, x);
}

float block_ssd(const ImageF& a, const ImageF& b, int ay, int ax, int by, int bx, int half) {
    float acc = 0.f;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            const float d = pix(a, ay + dy, ax + dx) - pix(b, by + dy, bx + dx);
            acc += d * d;
        }
    return acc;
}

// Offsets sorted by radius then (dy,dx): with strict-less comparison the
// smallest displacement wins SSD ties, which pins flat regions to zero flow.
std::vector<std::pair<int, int>> search_offsets(int r) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) offs.emplace_back(dy, dx);
    std::stable_sort(offs.begin(), offs.end(), [](const auto& l, const auto& r2) {
        const int nl = l.first * l.first + l.second * l.second;
        const int nr = r2.first * r2.first + r2.second * r2.second;
        if (nl != nr) return nl < nr;
        return l < r2;
    });
    return offs;
}

// 1D parabolic minimum refinement from three cost samples; clamped to [-.5,.5].
float parabolic(float cm, float c0, float cp) {
    const float denom = cm - 2.f * c0 + cp;
    if (denom <= 1e-12f) return 0.f;
    return std::clamp(0.5f * (cm - cp) / denom, -0.5f, 0.5f);
}

}  // namespace

FlowField dense_flow(const ImageF& a, const ImageF& b, const FlowParams& params) {
    if (a.h != b.h || a.w != b.w) throw ShapeError("dense_flow: frame sizes differ");
    if (a.h < 16 || a.w < 16) throw ConfigError("dense_flow: frames must be at least 16x16");
    if (params.levels < 1 || params.block < 3 || params.block % 2 == 0 || params.search < 1)
        throw ConfigError("dense_flow: bad parameters");
    const int coarse_h = a.h >> (params.levels - 1);
    const int coarse_w = a.w >> (params.levels - 1);
    if (coarse_h < params.block || coarse_w < params.block)
        throw ConfigError("dense_flow: image too small for " + std::to_string(params.levels) +
                          " pyramid levels");

    std::vector<ImageF> pyr_a{a}, pyr_b{b};
    for (int l = 1; l < params.levels; ++l) {
        pyr_a.push_back(downsample_half(pyr_a.back()));
        pyr_b.push_back(downsample_half(pyr_b.back()));
    }

    const auto offsets = search_offsets(params.search);
    const int half = params.block / 2;

    FlowField flow;  // at current level
    for (int l = params.levels - 1; l >= 0; --l) {
        const ImageF& la = pyr_a[static_cast<std::size_t>(l)];
        const ImageF& lb = pyr_b[static_cast<std::size_t>(l)];
        FlowField cur(la.h, la.w);
        const bool has_prev = flow.h > 0;
        parallel_for(la.h, [&](std::int64_t y0, std::int64_t y1, int) {
            for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
                for (int x = 0; x < la.w; ++x) {
                    int py = 0, px = 0;
                    if (has_prev) {
                        const std::size_t pi =
                            flow.idx(std::min(y / 2, flow.h - 1), std::min(x / 2, flow.w - 1));
                        py = static_cast<int>(std::lround(2.f * flow.v[pi]));
                        px = static_cast<int>(std::lround(2.f * flow.u[pi]));
                    }
                    float best = std::numeric_limits<float>::max();
                    int bdy = py, bdx = px;
                    for (const auto& [dy, dx] : offsets) {
                        const float c =
                            block_ssd(la, lb, y, x, y + py + dy, x + px + dx, half);
                        if (c < best) {
                            best = c;
                            bdy = py + dy;
                            bdx = px + dx;
                        }
                    }
                    // parabolic subpixel along each axis around the winner
                    const float cyl = block_ssd(la, lb, y, x, y + bdy - 1, x + bdx, half);
                    const float cyr = block_ssd(la, lb, y, x, y + bdy + 1, x + bdx, half);
                    const float cxl = block_ssd(la, lb, y, x, y + bdy, x + bdx - 1, half);
                    const float cxr = block_ssd(la, lb, y, x, y + bdy, x + bdx + 1, half);
                    const std::size_t i = cur.idx(y, x);
                    cur.v[i] = static_cast<float>(bdy) + parabolic(cyl, best, cyr);
                    cur.u[i] = static_cast<float>(bdx) + parabolic(cxl, best, cxr);
                }
        });
        flow = std::move(cur);
    }
    return flow;
}

Vec2 sample_flow(const FlowField& f, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(f.h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(f.w - 1));
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, f.h - 1), x1 = std::min(x0 + 1, f.w - 1);
    const double fy = y - y0, fx = x - x0;
    auto lerp2 = [&](const std::vector<float>& c) {
        const double a = c[f.idx(y0, x0)] * (1 - fx) + c[f.idx(y0, x1)] * fx;
        const double b = c[f.idx(y1, x0)] * (1 - fx) + c[f.idx(y1, x1)] * fx;
        return a * (1 - fy) + b * fy;
    };
    return {lerp2(f.u), lerp2(f.v)};
}

ImageRGB encode_flow_rgb(const FlowField& flow, float m_max) {
    if (m_max <= 0.f) throw ContractError("encode_flow_rgb: m_max must be > 0");
    ImageRGB out(flow.h, flow.w);
    const std::size_t hw = static_cast<std::size_t>(flow.h) * flow.w;
    for (std::size_t i = 0; i < hw; ++i) {
        const float u = flow.u[i], v = flow.v[i];
        const float mag = std::sqrt(u * u + v * v);
        float c1 = 0.5f, c2 = 0.5f, c3 = 0.f;
        if (mag > 0.f) {
            c1 = (u / mag + 1.f) * 0.5f;
            c2 = (v / mag + 1.f) * 0.5f;
            c3 = std::min(mag / m_max, 1.f);
        }
        out.v[i] = c1;
        out.v[hw + i] = c2;
        out.v[2 * hw + i] = c3;
    }
    return out;
}

}  // namespace msa
