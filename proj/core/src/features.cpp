#include "msa/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msa/error.hpp"

namespace msa {

std::vector<Corner> detect_corners(const ImageF& frame, const HarrisParams& params) {
    if (params.window < 1 || params.window % 2 == 0)
        throw ConfigError("detect_corners: window must be odd");
    const int h = frame.h, w = frame.w;
    if (h < 8 || w < 8) return {};

    std::vector<float> ix(static_cast<std::size_t>(h) * w, 0.f);
    std::vector<float> iy(ix.size(), 0.f);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            ix[i] = 0.5f * (frame.at(y, x + 1) - frame.at(y, x - 1));
            iy[i] = 0.5f * (frame.at(y + 1, x) - frame.at(y - 1, x));
        }

    const int half = params.window / 2;
    const int margin = half + 1;
    std::vector<float> resp(ix.size(), 0.f);
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x) {
            float sxx = 0.f, syy = 0.f, sxy = 0.f;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    const std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
                    sxx += ix[i] * ix[i];
                    syy += iy[i] * iy[i];
                    sxy += ix[i] * iy[i];
                }
            const float tr = sxx + syy;
            resp[static_cast<std::size_t>(y) * w + x] = sxx * syy - sxy * sxy - params.k * tr * tr;
        }

    // non-max suppression; ties kept for the earlier pixel in scan order
    std::vector<Corner> corners;
    const int r = params.nms_radius;
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x) {
            const float v = resp[static_cast<std::size_t>(y) * w + x];
            if (v <= params.min_response) continue;
            bool is_max = true;
            for (int dy = -r; dy <= r && is_max; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const float nv = resp[static_cast<std::size_t>(ny) * w + nx];
                    if (nv > v || (nv == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) corners.push_back({static_cast<double>(y), static_cast<double>(x), v});
        }

    std::stable_sort(corners.begin(), corners.end(), [](const Corner& a, const Corner& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (static_cast<int>(corners.size()) > params.top_k) corners.resize(params.top_k);
    return corners;
}

namespace {

float patch_ssd(const ImageF& a, int ay, int ax, const ImageF& b, int by, int bx, int half) {
    float acc = 0.f;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            const float d = a.at(ay + dy, ax + dx) - b.at(by + dy, bx + dx);
            acc += d * d;
        }
    return acc;
}

float parabolic(float cm, float c0, float cp) {
    const float denom = cm - 2.f * c0 + cp;
    if (denom <= 1e-12f) return 0.f;
    return std::clamp(0.5f * (cm - cp) / denom, -0.5f, 0.5f);
}

}  // namespace

std::optional<Vec2> track_point(const ImageF& a, const ImageF& b, Vec2 p,
                                const TrackParams& params) {
    const int half = params.block / 2;
    const int cy = static_cast<int>(std::lround(p.y));
    const int cx = static_cast<int>(std::lround(p.x));
    if (cy - half < 0 || cy + half >= a.h || cx - half < 0 || cx + half >= a.w)
        return std::nullopt;  // template leaves the frame

    float best = std::numeric_limits<float>::max();
    int bdy = 0, bdx = 0;
    bool found = false;
    for (int rad = 0; rad <= params.search; ++rad)
        for (int dy = -params.search; dy <= params.search; ++dy)
            for (int dx = -params.search; dx <= params.search; ++dx) {
                if (std::max(std::abs(dy), std::abs(dx)) != rad) continue;  // ring order
                const int ty = cy + dy, tx = cx + dx;
                if (ty - half < 0 || ty + half >= b.h || tx - half < 0 || tx + half >= b.w)
                    continue;
                const float c = patch_ssd(a, cy, cx, b, ty, tx, half);
                if (c < best) {
                    best = c;
                    bdy = dy;
                    bdx = dx;
                    found = true;
                }
            }
    if (!found) return std::nullopt;

    auto cost_at = [&](int dy, int dx) -> std::optional<float> {
        const int ty = cy + dy, tx = cx + dx;
        if (ty - half < 0 || ty + half >= b.h || tx - half < 0 || tx + half >= b.w)
            return std::nullopt;
        return patch_ssd(a, cy, cx, b, ty, tx, half);
    };
    float sy = 0.f, sx = 0.f;
    if (auto cm = cost_at(bdy - 1, bdx), cp = cost_at(bdy + 1, bdx); cm && cp)
        sy = parabolic(*cm, best, *cp);
    if (auto cm = cost_at(bdy, bdx - 1), cp = cost_at(bdy, bdx + 1); cm && cp)
        sx = parabolic(*cm, best, *cp);

    return Vec2{p.x + bdx + sx, p.y + bdy + sy};
}

}  // namespace msa
