#pragma once

#include <array>
#include <span>
#include <vector>

#include "msa/flow.hpp"
#include "msa/image.hpp"
#include "msa/rng.hpp"

namespace msa {

// 3x3 projective transform, row-major, normalized so m[8] == 1 when nonzero.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    static Homography translation(double tx, double ty);

    Vec2 apply(const Vec2& p) const;
    double det() const;
    bool invertible(double eps = 1e-9) const;
    Homography inverse() const;
    Homography compose(const Homography& rhs) const;  // this * rhs
    void normalize();
};

// Least-squares homography from >= 4 correspondences via normalized DLT.
// Throws EstimationError on degenerate input.
Homography fit_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst);

struct RansacParams {
    int iters = 500;
    double inlier_px = 1.5;
};

struct HomographyEstimate {
    Homography h;
    std::vector<std::uint8_t> inliers;
    int inlier_count = 0;
    double inlier_error = 0;  // summed reprojection error of the inliers
};

// RANSAC over 4-point DLT fits with a final normalized-DLT refit on the
// inlier set. The sampler draws from the provided stream, so identical
// (matches, params, stream state) give identical results.
HomographyEstimate estimate_homography(std::span<const Vec2> src, std::span<const Vec2> dst,
                                       const RansacParams& params, RngStream& rng);

// Per-pixel flow induced by a homography: flow(p) = project(H p) - p.
// Pixels mapping to w ~ 0 are flagged invalid.
FlowField camera_flow(const Homography& h, int height, int width);

// Elementwise difference flow - cam; invalid pixels propagate.
FlowField warp_flow(const FlowField& flow, const FlowField& cam);

}  // namespace msa
