#pragma once

#include <optional>
#include <vector>

#include "msa/image.hpp"

namespace msa {

struct Corner {
    double y = 0, x = 0;
    float response = 0;
};

struct HarrisParams {
    float k = 0.04f;
    int window = 3;        // structure-tensor accumulation window (odd)
    int nms_radius = 4;
    int top_k = 200;
    float min_response = 1e-6f;
};

// Harris corners; output sorted by (response desc, row, col), at most top_k.
std::vector<Corner> detect_corners(const ImageF& frame, const HarrisParams& params = {});

struct TrackParams {
    int block = 7;   // template window (odd)
    int search = 4;  // +/- integer search radius
};

// Block-match a single point from frame a to frame b around its current
// position, with parabolic subpixel refinement. Returns nullopt when the
// template window would leave frame a.
std::optional<Vec2> track_point(const ImageF& a, const ImageF& b, Vec2 p,
                                const TrackParams& params = {});

}  // namespace msa
