#include "msa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "msa/error.hpp"
#include "msa/sampling.hpp"
#include "msa/sptn.hpp"

namespace msa {

namespace {

constexpr int kWorldMargin = 24;

// Multi-octave value noise in [0,1].
ImageF value_noise(int h, int w, RngStream& rng) {
    ImageF out(h, w, 0.f);
    const int cells[3] = {16, 8, 4};
    const float weights[3] = {0.5f, 0.3f, 0.2f};
    for (int o = 0; o < 3; ++o) {
        const int cell = cells[o];
        const int gh = h / cell + 2, gw = w / cell + 2;
        std::vector<float> grid(static_cast<std::size_t>(gh) * gw);
        for (auto& g : grid) g = static_cast<float>(rng.uniform());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double gy = static_cast<double>(y) / cell;
                const double gx = static_cast<double>(x) / cell;
                const int iy = static_cast<int>(gy), ix = static_cast<int>(gx);
                const double fy = gy - iy, fx = gx - ix;
                const auto g = [&](int yy, int xx) {
                    return grid[static_cast<std::size_t>(yy) * gw + xx];
                };
                const double a = g(iy, ix) * (1 - fx) + g(iy, ix + 1) * fx;
                const double b = g(iy + 1, ix) * (1 - fx) + g(iy + 1, ix + 1) * fx;
                out.at(y, x) += weights[o] * static_cast<float>(a * (1 - fy) + b * fy);
            }
    }
    return out;
}

ImageRGB background_texture(int h, int w, std::uint64_t seed) {
    RngStream rng(seed, "background");
    const ImageF luma = value_noise(h, w, rng);
    const ImageF tint_r = value_noise(h, w, rng);
    const ImageF tint_g = value_noise(h, w, rng);
    ImageRGB out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float l = 0.25f + 0.55f * luma.at(y, x);
            out.at(0, y, x) = std::clamp(l + 0.12f * (tint_r.at(y, x) - 0.5f), 0.f, 1.f);
            out.at(1, y, x) = std::clamp(l + 0.12f * (tint_g.at(y, x) - 0.5f), 0.f, 1.f);
            out.at(2, y, x) = std::clamp(l - 0.06f * (tint_r.at(y, x) - 0.5f), 0.f, 1.f);
        }
    return out;
}

// Signed distance to the shape boundary (negative inside), world units.
double shape_distance(ShapeKind kind, double dx, double dy, double size) {
    const double r = size * 0.5;
    switch (kind) {
        case ShapeKind::circle:
            return std::hypot(dx, dy) - r;
        case ShapeKind::square:
            return std::max(std::abs(dx), std::abs(dy)) - r;
        case ShapeKind::triangle: {
            // equilateral, apex up, circumradius r
            const double sqrt3 = std::sqrt(3.0);
            const double e1 = (sqrt3 * dx + dy) * 0.5 - r * 0.5;   // upper-right edge
            const double e2 = (-sqrt3 * dx + dy) * 0.5 - r * 0.5;  // upper-left edge
            const double e3 = -dy - r * 0.5;                       // bottom edge
            return std::max({e1, e2, e3});
        }
    }
    return 1e9;
}

struct CameraState {
    Homography image_to_world;  // affine
    Homography world_to_image;
};

CameraState camera_at(const SceneSpec& spec, int t) {
    const auto& cam = spec.camera;
    const double two_pi = 2.0 * M_PI;
    const double phase = two_pi * t / spec.t_frames;
    const double theta = cam.rotate_amp_deg * M_PI / 180.0 * std::sin(phase + cam.phase_r);
    const double tx = cam.translate_amp * std::sin(phase + cam.phase_x) + cam.pan_x * t;
    const double ty = cam.translate_amp * std::sin(phase + cam.phase_y) + cam.pan_y * t;
    const double cx = (spec.w - 1) * 0.5, cy = (spec.h - 1) * 0.5;
    const double c = std::cos(theta), s = std::sin(theta);

    Homography w2i_inv;  // image -> world: rotate about center, then shift
    w2i_inv.m = {c, -s, -c * cx + s * cy + cx + kWorldMargin + tx,
                 s, c,  -s * cx - c * cy + cy + kWorldMargin + ty,
                 0, 0,  1};
    CameraState st;
    st.image_to_world = w2i_inv;
    st.world_to_image = w2i_inv.inverse();
    return st;
}

float sample_rgb_plane(const ImageRGB& img, int c, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, img.h - 1), x1 = std::min(x0 + 1, img.w - 1);
    const double fy = y - y0, fx = x - x0;
    const double a = img.at(c, y0, x0) * (1 - fx) + img.at(c, y0, x1) * fx;
    const double b = img.at(c, y1, x0) * (1 - fx) + img.at(c, y1, x1) * fx;
    return static_cast<float>(a * (1 - fy) + b * fy);
}

}  // namespace

VideoClip gen_clip(const SceneSpec& spec) {
    if (spec.t_frames < 11)
        throw ConfigError("gen_clip: clip length must be >= 11 (one trajectory window)");
    if (spec.h < 32 || spec.w < 32) throw ConfigError("gen_clip: frames must be >= 32x32");

    const int wh = spec.h + 2 * kWorldMargin, ww = spec.w + 2 * kWorldMargin;
    const ImageRGB world = background_texture(wh, ww, spec.texture_seed);

    // object-local patterns, sampled in object coordinates so they move
    // rigidly with the shape
    std::vector<ImageF> obj_tex;
    for (const auto& obj : spec.objects) {
        RngStream tex_rng(obj.texture_seed, "object_texture");
        const int side = static_cast<int>(std::ceil(obj.size_px)) + 8;
        obj_tex.push_back(value_noise(side, side, tex_rng));
    }

    // validate the bounds invariant before rendering anything
    for (int t = 0; t < spec.t_frames; ++t) {
        const CameraState cam = camera_at(spec, t);
        for (const auto& obj : spec.objects) {
            const Vec2 c_world{obj.start.x + obj.velocity.x * t + kWorldMargin,
                               obj.start.y + obj.velocity.y * t + kWorldMargin};
            const Vec2 c_img = cam.world_to_image.apply(c_world);
            const double r = obj.size_px * 0.5 + 1;
            if (c_img.x - r < 2 || c_img.x + r > spec.w - 3 || c_img.y - r < 2 ||
                c_img.y + r > spec.h - 3)
                throw ConfigError("gen_clip: object leaves the 2 px safety margin at frame " +
                                  std::to_string(t));
        }
    }

    VideoClip clip;
    clip.t = spec.t_frames;
    clip.h = spec.h;
    clip.w = spec.w;
    clip.frames.reserve(static_cast<std::size_t>(spec.t_frames));
    clip.object_masks.reserve(static_cast<std::size_t>(spec.t_frames));
    clip.image_to_world.reserve(static_cast<std::size_t>(spec.t_frames));

    for (int t = 0; t < spec.t_frames; ++t) {
        const CameraState cam = camera_at(spec, t);
        clip.image_to_world.push_back(cam.image_to_world);
        ImageRGB frame(spec.h, spec.w);
        MaskU8 mask(spec.h, spec.w, 0);
        for (int y = 0; y < spec.h; ++y)
            for (int x = 0; x < spec.w; ++x) {
                const Vec2 q = cam.image_to_world.apply({static_cast<double>(x),
                                                         static_cast<double>(y)});
                float rgb[3] = {sample_rgb_plane(world, 0, q.y, q.x),
                                sample_rgb_plane(world, 1, q.y, q.x),
                                sample_rgb_plane(world, 2, q.y, q.x)};
                float total_alpha = 0.f;
                for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
                    const auto& obj = spec.objects[oi];
                    const double ox = obj.start.x + obj.velocity.x * t + kWorldMargin;
                    const double oy = obj.start.y + obj.velocity.y * t + kWorldMargin;
                    const double sd = shape_distance(obj.kind, q.x - ox, q.y - oy, obj.size_px);
                    const float alpha = static_cast<float>(std::clamp(0.5 - sd, 0.0, 1.0));
                    if (alpha <= 0.f) continue;
                    const auto& tex = obj_tex[oi];
                    const double ty = q.y - oy + tex.h * 0.5, tx2 = q.x - ox + tex.w * 0.5;
                    const float shade = 0.55f + 0.45f * sample_bilinear(tex, ty, tx2);
                    for (int c = 0; c < 3; ++c)
                        rgb[c] = rgb[c] * (1 - alpha) + obj.color[static_cast<std::size_t>(c)] *
                                                            shade * alpha;
                    total_alpha = std::max(total_alpha, alpha);
                }
                for (int c = 0; c < 3; ++c) frame.at(c, y, x) = std::clamp(rgb[c], 0.f, 1.f);
                if (total_alpha > 0.5f) mask.at(y, x) = 255;
            }
        clip.frames.push_back(std::move(frame));
        clip.object_masks.push_back(std::move(mask));
    }
    return clip;
}

Homography true_pair_homography(const VideoClip& clip, int t) {
    if (t < 0 || t + 1 >= clip.t) throw ContractError("true_pair_homography: bad frame index");
    return clip.image_to_world[static_cast<std::size_t>(t + 1)].inverse().compose(
        clip.image_to_world[static_cast<std::size_t>(t)]);
}

namespace {

std::string index_name(const char* prefix, int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d.pgm", prefix, idx);
    return buf;
}

void write_camera_txt(const std::filesystem::path& path, const VideoClip& clip) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    char buf[64];
    for (const auto& h : clip.image_to_world) {
        for (int i = 0; i < 9; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", h.m[static_cast<std::size_t>(i)]);
            f << buf << (i == 8 ? "" : " ");
        }
        f << "\n";
    }
    if (!f) throw IoError("short write: " + path.string());
}

void write_frames_sptn(const std::filesystem::path& path, const VideoClip& clip) {
    const std::size_t hw = static_cast<std::size_t>(clip.h) * clip.w;
    std::vector<std::uint8_t> data;
    data.reserve(static_cast<std::size_t>(clip.t) * 3 * hw);
    for (const auto& frame : clip.frames)
        for (float v : frame.v)
            data.push_back(static_cast<std::uint8_t>(
                std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
    write_sptn_u8(path, {clip.t, 3, clip.h, clip.w}, data);
}

struct ClipPlan {
    SceneSpec spec;
    ManifestEntry entry;
};

SceneSpec make_scene(const DatasetConfig& cfg, int verb, int noun, RngStream& rng) {
    SceneSpec spec;
    spec.h = cfg.h;
    spec.w = cfg.w;
    spec.t_frames = cfg.t_frames;
    spec.texture_seed = rng.next_u64();
    spec.verb = verb;
    spec.noun = noun;
    spec.label = verb * static_cast<int>(cfg.nouns.size()) + noun;

    spec.camera.translate_amp = cfg.cam_translate * rng.uniform(0.6, 1.0);
    spec.camera.rotate_amp_deg = cfg.cam_rotate_deg * rng.uniform(0.5, 1.0);
    spec.camera.phase_x = rng.uniform(0, 2 * M_PI);
    spec.camera.phase_y = rng.uniform(0, 2 * M_PI);
    spec.camera.phase_r = rng.uniform(0, 2 * M_PI);
    spec.camera.pan_x = rng.uniform(-0.15, 0.15);
    spec.camera.pan_y = rng.uniform(-0.15, 0.15);

    ObjectSpec obj;
    const std::string& noun_name = cfg.nouns[static_cast<std::size_t>(noun)];
    obj.kind = noun_name == "square"
                   ? ShapeKind::square
                   : (noun_name == "triangle" ? ShapeKind::triangle : ShapeKind::circle);
    obj.size_px = rng.uniform(cfg.size_min, cfg.size_max);
    for (auto& c : obj.color) c = static_cast<float>(rng.uniform(0.25, 0.95));
    obj.texture_seed = rng.next_u64();

    const double speed = cfg.speed * rng.uniform(0.9, 1.1);
    const std::string& verb_name = cfg.verbs[static_cast<std::size_t>(verb)];
    if (verb_name == "left")
        obj.velocity = {-speed, 0};
    else if (verb_name == "right")
        obj.velocity = {speed, 0};
    else if (verb_name == "up")
        obj.velocity = {0, -speed};
    else if (verb_name == "down")
        obj.velocity = {0, speed};
    else
        throw ConfigError("unknown verb '" + verb_name + "' (expected left/right/up/down)");

    // start range keeping the object 2 px inside the frame for every t under
    // worst-case camera displacement
    const double cam_pad = spec.camera.translate_amp + 0.15 * cfg.t_frames +
                           cfg.cam_rotate_deg * M_PI / 180.0 * std::hypot(cfg.h, cfg.w) * 0.5 + 1;
    const double r = obj.size_px * 0.5 + 1;
    auto start_range = [&](double dim, double vel) {
        const double travel = vel * (cfg.t_frames - 1);
        double lo = 2 + r + cam_pad + std::max(0.0, -travel);
        double hi = dim - 3 - r - cam_pad - std::max(0.0, travel);
        if (lo >= hi)
            throw ConfigError("dataset geometry infeasible: object cannot stay in bounds "
                              "(reduce speed or camera motion)");
        return std::pair<double, double>(lo, hi);
    };
    const auto [xlo, xhi] = start_range(cfg.w, obj.velocity.x);
    const auto [ylo, yhi] = start_range(cfg.h, obj.velocity.y);
    obj.start = {rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)};
    spec.objects.push_back(obj);
    return spec;
}

void write_clip(const std::filesystem::path& clip_dir, const DatasetConfig& cfg,
                const ClipPlan& plan, std::uint64_t seed) {
    std::filesystem::create_directories(clip_dir);
    RngStream clip_rng(seed, "clip." + plan.entry.clip_id);
    const VideoClip clip = gen_clip(plan.spec, clip_rng);

    write_frames_sptn(clip_dir / "frames.sptn", clip);
    for (int t = 0; t < clip.t; ++t)
        write_pgm(clip_dir / mask_file_name(t), clip.object_masks[static_cast<std::size_t>(t)]);
    write_camera_txt(clip_dir / "camera.txt", clip);

    // unsupervised motion ground truth: one clamped window per frame
    std::vector<ImageF> grays;
    grays.reserve(static_cast<std::size_t>(clip.t));
    for (const auto& f : clip.frames) grays.push_back(to_gray(f));
    RngStream ransac_rng(seed, "ransac." + plan.entry.clip_id);
    ClipMotionGt gt(std::move(grays), cfg.gt, ransac_rng);

    std::vector<MotionMapResult> by_window(static_cast<std::size_t>(clip.t));
    std::vector<bool> have(static_cast<std::size_t>(clip.t), false);
    auto map_at = [&](int t) -> const MotionMapResult& {
        const int u = std::clamp(t, 0, clip.t - 1 - cfg.gt.traj_len);
        if (!have[static_cast<std::size_t>(u)]) {
            by_window[static_cast<std::size_t>(u)] = gt.frame_map(u, cfg.map_s);
            have[static_cast<std::size_t>(u)] = true;
        }
        return by_window[static_cast<std::size_t>(u)];
    };

    for (int t = 0; t < clip.t; ++t)
        write_pgm(clip_dir / motion_mask_file_name(t), map_at(t).mask);

    const auto sampled = sample_frames(clip.t, cfg.n_frames, false);
    std::vector<float> maps;
    maps.reserve(static_cast<std::size_t>(cfg.n_frames) * cfg.map_s * cfg.map_s);
    for (int k : sampled) {
        const auto& cells = map_at(k).map.cells;
        maps.insert(maps.end(), cells.begin(), cells.end());
    }
    write_sptn(clip_dir / "motion_maps.sptn",
               Tensor<float>::from_data({cfg.n_frames, cfg.map_s, cfg.map_s}, std::move(maps)));
}

}  // namespace

std::string mask_file_name(int frame_idx) { return index_name("mask", frame_idx); }
std::string motion_mask_file_name(int frame_idx) { return index_name("motion_mask", frame_idx); }

DatasetManifest gen_dataset(const DatasetConfig& config, std::uint64_t seed,
                            const std::filesystem::path& root) {
    if (config.verbs.size() * config.nouns.size() < 2)
        throw ConfigError("gen_dataset: need at least 2 classes");
    if (config.train_per_class < 1 || config.test_per_class < 0)
        throw ConfigError("gen_dataset: bad clip counts");
    if (config.t_frames < config.gt.traj_len + 1)
        throw ConfigError("gen_dataset: clips shorter than one trajectory window");

    DatasetManifest manifest;
    manifest.verbs = config.verbs;
    manifest.nouns = config.nouns;
    for (const auto& v : config.verbs)
        for (const auto& n : config.nouns) manifest.classes.push_back(v + "_" + n);

    std::vector<ClipPlan> plans;
    for (int verb = 0; verb < static_cast<int>(config.verbs.size()); ++verb)
        for (int noun = 0; noun < static_cast<int>(config.nouns.size()); ++noun)
            for (const char* split : {"train", "test"}) {
                const int count = split == std::string("train") ? config.train_per_class
                                                                : config.test_per_class;
                for (int k = 0; k < count; ++k) {
                    ClipPlan plan;
                    char id[96];
                    std::snprintf(id, sizeof(id), "%s_%s_%s%03d",
                                  config.verbs[static_cast<std::size_t>(verb)].c_str(),
                                  config.nouns[static_cast<std::size_t>(noun)].c_str(), split, k);
                    plan.entry.clip_id = id;
                    plan.entry.path = std::string("clips/") + id;
                    plan.entry.split = split;
                    plan.entry.verb = verb;
                    plan.entry.noun = noun;
                    plan.entry.label = verb * static_cast<int>(config.nouns.size()) + noun;
                    plan.entry.t = config.t_frames;
                    RngStream scene_rng(seed, "scene." + plan.entry.clip_id);
                    plan.spec = make_scene(config, verb, noun, scene_rng);
                    plans.push_back(std::move(plan));
                }
            }

    std::filesystem::create_directories(root / "clips");

    const int workers = std::max(1, config.workers);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto work = [&](int wid) {
        for (std::size_t i = static_cast<std::size_t>(wid); i < plans.size();
             i += static_cast<std::size_t>(workers)) {
            {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (first_error) return;
            }
            try {
                write_clip(root / plans[i].entry.path, config, plans[i], seed);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int wid = 0; wid < workers; ++wid) threads.emplace_back(work, wid);
        for (auto& t : threads) t.join();
    }
    if (first_error) {
        // partial-output cleanup: drop the clip directories from this run
        std::error_code ec;
        for (const auto& p : plans) std::filesystem::remove_all(root / p.entry.path, ec);
        std::rethrow_exception(first_error);
    }

    for (const auto& p : plans) manifest.entries.push_back(p.entry);
    save_manifest(manifest, root);
    return manifest;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& root) {
    nlohmann::json j;
    j["version"] = m.version;
    j["classes"] = m.classes;
    j["verbs"] = m.verbs;
    j["nouns"] = m.nouns;
    auto entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json je;
        je["clip_id"] = e.clip_id;
        je["path"] = e.path;
        je["label"] = e.label;
        je["verb"] = e.verb;
        je["noun"] = e.noun;
        je["split"] = e.split;
        je["T"] = e.t;
        entries.push_back(je);
    }
    j["entries"] = entries;
    std::ofstream f(root / "manifest.json", std::ios::trunc);
    if (!f) throw IoError("cannot write manifest at " + root.string());
    f << j.dump(2) << "\n";
    if (!f) throw IoError("short write: manifest.json");
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
    std::ifstream f(root / "manifest.json");
    if (!f) throw IoError("cannot open manifest at " + (root / "manifest.json").string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest.json: " + std::string(e.what()));
    }
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.verbs = j.at("verbs").get<std::vector<std::string>>();
    m.nouns = j.at("nouns").get<std::vector<std::string>>();
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        e.clip_id = je.at("clip_id").get<std::string>();
        e.path = je.at("path").get<std::string>();
        e.label = je.at("label").get<int>();
        e.verb = je.at("verb").get<int>();
        e.noun = je.at("noun").get<int>();
        e.split = je.at("split").get<std::string>();
        e.t = je.at("T").get<int>();
        m.entries.push_back(e);
    }
    return m;
}

void regenerate_motion_maps(const std::filesystem::path& root, const DatasetConfig& config,
                            std::uint64_t seed) {
    const DatasetManifest m = load_manifest(root);
    for (const auto& e : m.entries) {
        const auto clip_dir = root / e.path;
        Shape shape;
        const auto raw = read_sptn_u8(clip_dir / "frames.sptn", &shape);
        if (shape.size() != 4 || shape[1] != 3)
            throw IoError("unexpected frames.sptn shape in " + clip_dir.string());
        const int t_total = static_cast<int>(shape[0]);
        const int h = static_cast<int>(shape[2]), w = static_cast<int>(shape[3]);
        std::vector<ImageF> grays;
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        for (int t = 0; t < t_total; ++t) {
            ImageF g(h, w);
            const std::uint8_t* base = raw.data() + static_cast<std::size_t>(t) * 3 * hw;
            for (std::size_t i = 0; i < hw; ++i)
                g.v[i] = (0.299f * base[i] + 0.587f * base[hw + i] + 0.114f * base[2 * hw + i]) /
                         255.f;
            grays.push_back(std::move(g));
        }
        RngStream ransac_rng(seed, "ransac." + e.clip_id);
        ClipMotionGt gt(std::move(grays), config.gt, ransac_rng);

        std::vector<MotionMapResult> by_window(static_cast<std::size_t>(t_total));
        std::vector<bool> have(static_cast<std::size_t>(t_total), false);
        auto map_at = [&](int t) -> const MotionMapResult& {
            const int u = std::clamp(t, 0, t_total - 1 - config.gt.traj_len);
            if (!have[static_cast<std::size_t>(u)]) {
                by_window[static_cast<std::size_t>(u)] = gt.frame_map(u, config.map_s);
                have[static_cast<std::size_t>(u)] = true;
            }
            return by_window[static_cast<std::size_t>(u)];
        };
        for (int t = 0; t < t_total; ++t)
            write_pgm(clip_dir / motion_mask_file_name(t), map_at(t).mask);
        const auto sampled = sample_frames(t_total, config.n_frames, false);
        std::vector<float> maps;
        for (int k : sampled) {
            const auto& cells = map_at(k).map.cells;
            maps.insert(maps.end(), cells.begin(), cells.end());
        }
        write_sptn(clip_dir / "motion_maps.sptn",
                   Tensor<float>::from_data({config.n_frames, config.map_s, config.map_s},
                                            std::move(maps)));
    }
}

}  // namespace msa
