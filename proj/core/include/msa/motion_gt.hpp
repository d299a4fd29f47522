#pragma once

#include <span>
#include <vector>

#include "msa/features.hpp"
#include "msa/flow.hpp"
#include "msa/homography.hpp"
#include "msa/image.hpp"
#include "msa/rng.hpp"

namespace msa {

// One tracked keypoint: position at every frame of the window, points[0]
// being the seed. A valid trajectory has traj_len tracked steps, each with
// forward-backward error under the reliability threshold, never leaving the
// frame.
struct Trajectory {
    int start_frame = 0;
    std::vector<Vec2> points;
    bool valid = false;
};

struct TrajectorySet {
    int start_frame = 0;
    int traj_len = 0;
    std::vector<Trajectory> items;
};

struct MotionGtParams {
    int traj_len = 10;          // tracked steps per trajectory
    double tau_move = 0.8;      // px/step residual above which a track is moving
    double fb_max_px = 1.0;     // forward-backward round-trip reliability bound
    int stamp = 5;              // odd stamp size splatted at moving points
    FlowParams flow;
    HarrisParams harris;
    TrackParams track;
    RansacParams ransac;
    int rescale_height = 0;     // 0 = native; otherwise frames are height-rescaled first
};

// Soft s x s motion map, row-major cells in [0,1].
struct MotionMap {
    int s = 0;
    std::vector<float> cells;

    float at(int i, int j) const { return cells[static_cast<std::size_t>(i) * s + j]; }
};

// Track seeds across a window of traj_len+1 frames with per-step
// forward-backward verification.
TrajectorySet track_trajectories(std::span<const ImageF> window, std::span<const Corner> seeds,
                                 const MotionGtParams& params, int start_frame = 0);

// Label trajectories moving/static from per-step warp-flow residuals sampled
// along the track, then splat stamps of moving trajectories into a
// full-resolution mask.
MaskU8 moving_mask(const TrajectorySet& trajs, std::span<const FlowField> warp_flows, int height,
                   int width, const MotionGtParams& params);

// Exact area-average downsample of a byte mask onto an s x s grid
// (fractional cell borders handled by overlap weights).
MotionMap downsample_mask(const MaskU8& mask, int s);

// Area-average of the sub-rectangle [y0,y0+rh) x [x0,x0+rw) of the mask onto
// an s x s grid, optionally mirrored horizontally. Used to keep motion maps
// aligned with cropped/flipped frames.
MotionMap rasterize_mask_rect(const MaskU8& mask, double y0, double x0, double rh, double rw,
                              bool flip, int s);

struct MotionMapResult {
    MaskU8 mask;    // full-resolution union of stamps
    MotionMap map;  // downsampled soft map
};

MotionMapResult build_motion_map(const TrajectorySet& trajs,
                                 std::span<const FlowField> warp_flows, int height, int width,
                                 int s, const MotionGtParams& params);

// Per consecutive-pair analysis, cached by ClipMotionGt.
struct PairMotion {
    FlowField flow;
    Homography h;  // frame t -> t+1
    FlowField cam;
    FlowField warp;
};

// Lazily analyzes one clip: per-pair flow/homography and per-frame motion
// maps over a clamped traj_len window. Deterministic given the RANSAC stream.
class ClipMotionGt {
public:
    ClipMotionGt(std::vector<ImageF> gray_frames, const MotionGtParams& params,
                 RngStream& ransac_rng);

    const PairMotion& pair(int t);                 // frames t, t+1
    MotionMapResult frame_map(int t, int s);       // window starting at t (clamped)
    int frame_count() const { return static_cast<int>(frames_.size()); }

private:
    std::vector<ImageF> frames_;
    MotionGtParams params_;
    RngStream& rng_;
    std::vector<PairMotion> pairs_;
    std::vector<std::uint8_t> pair_done_;
};

}  // namespace msa
