#include "msa/motion_gt.hpp"

#include <algorithm>
#include <cmath>

#include "msa/error.hpp"

namespace msa {

TrajectorySet track_trajectories(std::span<const ImageF> window, std::span<const Corner> seeds,
                                 const MotionGtParams& params, int start_frame) {
    const int l = params.traj_len;
    if (static_cast<int>(window.size()) < l + 1)
        throw ContractError("track_trajectories: window must hold traj_len+1 frames");

    TrajectorySet set;
    set.start_frame = start_frame;
    set.traj_len = l;
    set.items.reserve(seeds.size());

    for (const auto& seed : seeds) {
        Trajectory traj;
        traj.start_frame = start_frame;
        traj.points.push_back({seed.x, seed.y});
        traj.valid = true;
        for (int step = 0; step < l; ++step) {
            const ImageF& fa = window[static_cast<std::size_t>(step)];
            const ImageF& fb = window[static_cast<std::size_t>(step + 1)];
            const Vec2 cur = traj.points.back();
            const auto fwd = track_point(fa, fb, cur, params.track);
            if (!fwd) {
                traj.valid = false;
                break;
            }
            const auto back = track_point(fb, fa, *fwd, params.track);
            if (!back || std::hypot(back->x - cur.x, back->y - cur.y) >= params.fb_max_px) {
                traj.valid = false;
                break;
            }
            if (fwd->x < 0 || fwd->x > fa.w - 1 || fwd->y < 0 || fwd->y > fa.h - 1) {
                traj.valid = false;
                break;
            }
            traj.points.push_back(*fwd);
        }
        set.items.push_back(std::move(traj));
    }
    return set;
}

MaskU8 moving_mask(const TrajectorySet& trajs, std::span<const FlowField> warp_flows, int height,
                   int width, const MotionGtParams& params) {
    if (static_cast<int>(warp_flows.size()) < trajs.traj_len)
        throw ContractError("moving_mask: need one warp flow per trajectory step");
    MaskU8 mask(height, width, 0);
    const int half = params.stamp / 2;
    for (const auto& traj : trajs.items) {
        if (!traj.valid) continue;
        // mean per-step residual: warp flow (flow minus camera motion)
        // sampled at the track position
        double acc = 0;
        for (int step = 0; step < trajs.traj_len; ++step) {
            const Vec2 p = traj.points[static_cast<std::size_t>(step)];
            const Vec2 r = sample_flow(warp_flows[static_cast<std::size_t>(step)], p.y, p.x);
            acc += std::hypot(r.x, r.y);
        }
        if (acc / trajs.traj_len <= params.tau_move) continue;
        for (const auto& p : traj.points) {
            const int cy = static_cast<int>(std::lround(p.y));
            const int cx = static_cast<int>(std::lround(p.x));
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    const int y = cy + dy, x = cx + dx;
                    if (y >= 0 && y < height && x >= 0 && x < width) mask.at(y, x) = 255;
                }
        }
    }
    return mask;
}

MotionMap downsample_mask(const MaskU8& mask, int s) {
    return rasterize_mask_rect(mask, 0, 0, mask.h, mask.w, false, s);
}

MotionMap rasterize_mask_rect(const MaskU8& mask, double y0, double x0, double rh, double rw,
                              bool flip, int s) {
    if (s < 1 || s > mask.h || s > mask.w)
        throw ConfigError("rasterize_mask_rect: grid size " + std::to_string(s) +
                          " incompatible with mask " + std::to_string(mask.h) + "x" +
                          std::to_string(mask.w));
    if (rh <= 0 || rw <= 0) throw GeometryError("rasterize_mask_rect: empty rectangle");

    // Per-axis overlap weights of source pixels against the fractional cell
    // borders; cell value = integral of the mask over the cell / cell area.
    auto axis_overlaps = [](double start, double extent, int cells, int limit) {
        // for each cell: list of (pixel index, overlap length)
        std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(cells));
        const double step = extent / cells;
        for (int c = 0; c < cells; ++c) {
            const double lo = start + c * step;
            const double hi = lo + step;
            const int p0 = std::max(0, static_cast<int>(std::floor(lo)));
            const int p1 = std::min(limit - 1, static_cast<int>(std::ceil(hi)) - 1);
            for (int p = p0; p <= p1; ++p) {
                const double ov = std::min<double>(hi, p + 1) - std::max<double>(lo, p);
                if (ov > 0) out[static_cast<std::size_t>(c)].emplace_back(p, ov);
            }
        }
        return out;
    };

    const auto rows = axis_overlaps(y0, rh, s, mask.h);
    const auto cols = axis_overlaps(x0, rw, s, mask.w);
    const double cell_area = (rh / s) * (rw / s);

    MotionMap map;
    map.s = s;
    map.cells.assign(static_cast<std::size_t>(s) * s, 0.f);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) {
            double acc = 0;
            for (const auto& [py, wy] : rows[static_cast<std::size_t>(i)])
                for (const auto& [px, wx] : cols[static_cast<std::size_t>(j)])
                    if (mask.at(py, px)) acc += wy * wx;
            const int jj = flip ? s - 1 - j : j;
            map.cells[static_cast<std::size_t>(i) * s + jj] =
                static_cast<float>(std::clamp(acc / cell_area, 0.0, 1.0));
        }
    return map;
}

MotionMapResult build_motion_map(const TrajectorySet& trajs,
                                 std::span<const FlowField> warp_flows, int height, int width,
                                 int s, const MotionGtParams& params) {
    MotionMapResult r;
    r.mask = moving_mask(trajs, warp_flows, height, width, params);
    r.map = downsample_mask(r.mask, s);
    return r;
}

ClipMotionGt::ClipMotionGt(std::vector<ImageF> gray_frames, const MotionGtParams& params,
                           RngStream& ransac_rng)
    : frames_(std::move(gray_frames)), params_(params), rng_(ransac_rng) {
    if (frames_.size() < 2) throw ContractError("ClipMotionGt: need at least two frames");
    if (params_.rescale_height > 0 && frames_[0].h != params_.rescale_height) {
        const int oh = params_.rescale_height;
        const int ow = static_cast<int>(std::lround(static_cast<double>(frames_[0].w) * oh /
                                                    frames_[0].h));
        for (auto& f : frames_) f = resize_bilinear(f, oh, ow);
    }
    pairs_.resize(frames_.size() - 1);
    pair_done_.assign(frames_.size() - 1, 0);
}

const PairMotion& ClipMotionGt::pair(int t) {
    if (t < 0 || t + 1 >= frame_count()) throw ContractError("pair index out of range");
    auto& pm = pairs_[static_cast<std::size_t>(t)];
    if (pair_done_[static_cast<std::size_t>(t)]) return pm;

    const ImageF& a = frames_[static_cast<std::size_t>(t)];
    const ImageF& b = frames_[static_cast<std::size_t>(t + 1)];
    pm.flow = dense_flow(a, b, params_.flow);

    // camera model from corner matches; fall back to identity when the scene
    // has too little structure
    const auto corners = detect_corners(a, params_.harris);
    std::vector<Vec2> src, dst;
    for (const auto& c : corners) {
        const auto m = track_point(a, b, {c.x, c.y}, params_.track);
        if (m) {
            src.push_back({c.x, c.y});
            dst.push_back(*m);
        }
    }
    if (src.size() >= 4) {
        try {
            pm.h = estimate_homography(src, dst, params_.ransac, rng_).h;
        } catch (const EstimationError&) {
            pm.h = Homography::identity();
        }
    } else {
        pm.h = Homography::identity();
    }
    pm.cam = camera_flow(pm.h, a.h, a.w);
    pm.warp = warp_flow(pm.flow, pm.cam);
    pair_done_[static_cast<std::size_t>(t)] = 1;
    return pm;
}

MotionMapResult ClipMotionGt::frame_map(int t, int s) {
    const int total = frame_count();
    const int l = params_.traj_len;
    if (total < l + 1)
        throw ContractError("frame_map: clip shorter than one trajectory window");
    const int t0 = std::clamp(t, 0, total - 1 - l);

    std::vector<FlowField> warps;
    warps.reserve(static_cast<std::size_t>(l));
    for (int step = 0; step < l; ++step) warps.push_back(pair(t0 + step).warp);

    std::span<const ImageF> window(frames_.data() + t0, static_cast<std::size_t>(l + 1));
    const auto seeds = detect_corners(frames_[static_cast<std::size_t>(t0)], params_.harris);
    const auto trajs = track_trajectories(window, seeds, params_, t0);
    return build_motion_map(trajs, warps, frames_[0].h, frames_[0].w, s, params_);
}

}  // namespace msa
