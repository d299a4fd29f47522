#include "msa/homography.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "msa/error.hpp"

namespace msa {

Homography Homography::translation(double tx, double ty) {
    Homography h;
    h.m = {1, 0, tx, 0, 1, ty, 0, 0, 1};
    return h;
}

Vec2 Homography::apply(const Vec2& p) const {
    const double x = m[0] * p.x + m[1] * p.y + m[2];
    const double y = m[3] * p.x + m[4] * p.y + m[5];
    const double w = m[6] * p.x + m[7] * p.y + m[8];
    return {x / w, y / w};
}

double Homography::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Homography::invertible(double eps) const { return std::abs(det()) > eps; }

Homography Homography::inverse() const {
    const double d = det();
    if (std::abs(d) <= 1e-12) throw EstimationError("homography not invertible");
    const auto& a = m;
    Homography r;
    r.m[0] = (a[4] * a[8] - a[5] * a[7]) / d;
    r.m[1] = (a[2] * a[7] - a[1] * a[8]) / d;
    r.m[2] = (a[1] * a[5] - a[2] * a[4]) / d;
    r.m[3] = (a[5] * a[6] - a[3] * a[8]) / d;
    r.m[4] = (a[0] * a[8] - a[2] * a[6]) / d;
    r.m[5] = (a[2] * a[3] - a[0] * a[5]) / d;
    r.m[6] = (a[3] * a[7] - a[4] * a[6]) / d;
    r.m[7] = (a[1] * a[6] - a[0] * a[7]) / d;
    r.m[8] = (a[0] * a[4] - a[1] * a[3]) / d;
    r.normalize();
    return r;
}

Homography Homography::compose(const Homography& rhs) const {
    Homography r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * rhs.m[k * 3 + j];
            r.m[i * 3 + j] = acc;
        }
    r.normalize();
    return r;
}

void Homography::normalize() {
    if (std::abs(m[8]) > 1e-12) {
        const double inv = 1.0 / m[8];
        for (auto& v : m) v *= inv;
    }
}

namespace {

struct Normalization {
    double cx, cy, scale;
};

Normalization normalize_points(std::span<const Vec2> pts, std::vector<Vec2>& out) {
    double cx = 0, cy = 0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_dist = 0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= static_cast<double>(pts.size());
    const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    out.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[i] = {(pts[i].x - cx) * scale, (pts[i].y - cy) * scale};
    return {cx, cy, scale};
}

// Homography between normalized point sets from the nullspace of the DLT
// system, via SVD.
Homography dlt_core(std::span<const Vec2> src, std::span<const Vec2> dst) {
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = src[static_cast<std::size_t>(i)];
        const auto& d = dst[static_cast<std::size_t>(i)];
        a.row(2 * i) << -s.x, -s.y, -1, 0, 0, 0, d.x * s.x, d.x * s.y, d.x;
        a.row(2 * i + 1) << 0, 0, 0, -s.x, -s.y, -1, d.y * s.x, d.y * s.y, d.y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd hv = svd.matrixV().col(8);
    Homography h;
    for (int i = 0; i < 9; ++i) h.m[static_cast<std::size_t>(i)] = hv(i);
    h.normalize();
    if (!h.invertible()) throw EstimationError("degenerate homography fit");
    return h;
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return std::abs(area) < 1e-6;
}

bool degenerate_sample(const std::array<Vec2, 4>& p) {
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k)
                if (collinear(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)],
                              p[static_cast<std::size_t>(k)]))
                    return true;
    return false;
}

double transfer_error(const Homography& h, const Vec2& s, const Vec2& d) {
    const Vec2 q = h.apply(s);
    return std::hypot(q.x - d.x, q.y - d.y);
}

}  // namespace

Homography fit_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst) {
    if (src.size() < 4 || src.size() != dst.size())
        throw EstimationError("fit_homography_dlt: need >= 4 point pairs");
    std::vector<Vec2> ns, nd;
    const Normalization ts = normalize_points(src, ns);
    const Normalization td = normalize_points(dst, nd);
    const Homography hn = dlt_core(ns, nd);
    // denormalize: H = T_dst^-1 * Hn * T_src
    Homography t_src;
    t_src.m = {ts.scale, 0, -ts.scale * ts.cx, 0, ts.scale, -ts.scale * ts.cy, 0, 0, 1};
    Homography t_dst_inv;
    t_dst_inv.m = {1.0 / td.scale, 0, td.cx, 0, 1.0 / td.scale, td.cy, 0, 0, 1};
    return t_dst_inv.compose(hn).compose(t_src);
}

HomographyEstimate estimate_homography(std::span<const Vec2> src, std::span<const Vec2> dst,
                                       const RansacParams& params, RngStream& rng) {
    if (src.size() != dst.size()) throw EstimationError("match lists differ in length");
    const auto n = src.size();
    if (n < 4) throw EstimationError("estimate_homography: need >= 4 matches, got " +
                                     std::to_string(n));

    int best_count = -1;
    double best_err = 0;
    Homography best_h;
    bool have_model = false;

    for (int it = 0; it < params.iters; ++it) {
        std::array<std::size_t, 4> idx{};
        for (int j = 0; j < 4; ++j) {
            bool fresh;
            do {
                idx[static_cast<std::size_t>(j)] =
                    static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
                fresh = true;
                for (int k = 0; k < j; ++k)
                    if (idx[static_cast<std::size_t>(k)] == idx[static_cast<std::size_t>(j)])
                        fresh = false;
            } while (!fresh);
        }
        const std::array<Vec2, 4> ps{src[idx[0]], src[idx[1]], src[idx[2]], src[idx[3]]};
        const std::array<Vec2, 4> pd{dst[idx[0]], dst[idx[1]], dst[idx[2]], dst[idx[3]]};
        if (degenerate_sample(ps) || degenerate_sample(pd)) continue;

        Homography h;
        try {
            h = fit_homography_dlt(std::span<const Vec2>(ps), std::span<const Vec2>(pd));
        } catch (const EstimationError&) {
            continue;
        }

        int count = 0;
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = transfer_error(h, src[i], dst[i]);
            if (e < params.inlier_px) {
                ++count;
                err += e;
            }
        }
        if (count > best_count || (count == best_count && err < best_err)) {
            best_count = count;
            best_err = err;
            best_h = h;
            have_model = true;
        }
    }

    if (!have_model || best_count < 4)
        throw EstimationError("RANSAC found no non-degenerate model with >= 4 inliers");

    // refit on the consensus set, then rebuild the mask from the refit model
    std::vector<Vec2> in_src, in_dst;
    for (std::size_t i = 0; i < n; ++i)
        if (transfer_error(best_h, src[i], dst[i]) < params.inlier_px) {
            in_src.push_back(src[i]);
            in_dst.push_back(dst[i]);
        }
    Homography refit = best_h;
    try {
        refit = fit_homography_dlt(in_src, in_dst);
    } catch (const EstimationError&) {
        refit = best_h;  // keep the sample model if the refit degenerates
    }

    HomographyEstimate est;
    est.h = refit;
    est.inliers.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = transfer_error(refit, src[i], dst[i]);
        if (e < params.inlier_px) {
            est.inliers[i] = 1;
            ++est.inlier_count;
            est.inlier_error += e;
        }
    }
    if (est.inlier_count < 4) {
        // refit drifted; fall back to the sample-stage model
        est.h = best_h;
        est.inliers.assign(n, 0);
        est.inlier_count = 0;
        est.inlier_error = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = transfer_error(best_h, src[i], dst[i]);
            if (e < params.inlier_px) {
                est.inliers[i] = 1;
                ++est.inlier_count;
                est.inlier_error += e;
            }
        }
    }
    return est;
}

FlowField camera_flow(const Homography& h, int height, int width) {
    if (!h.invertible()) throw EstimationError("camera_flow: homography not invertible");
    FlowField f(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double px = static_cast<double>(x), py = static_cast<double>(y);
            const double w = h.m[6] * px + h.m[7] * py + h.m[8];
            const std::size_t i = f.idx(y, x);
            if (std::abs(w) < 1e-9) {
                f.valid[i] = 0;
                continue;
            }
            const double qx = (h.m[0] * px + h.m[1] * py + h.m[2]) / w;
            const double qy = (h.m[3] * px + h.m[4] * py + h.m[5]) / w;
            f.u[i] = static_cast<float>(qx - px);
            f.v[i] = static_cast<float>(qy - py);
        }
    return f;
}

FlowField warp_flow(const FlowField& flow, const FlowField& cam) {
    if (flow.h != cam.h || flow.w != cam.w) throw ShapeError("warp_flow: size mismatch");
    FlowField out(flow.h, flow.w);
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        out.u[i] = flow.u[i] - cam.u[i];
        out.v[i] = flow.v[i] - cam.v[i];
        out.valid[i] = flow.valid[i] && cam.valid[i];
    }
    return out;
}

}  // namespace msa
