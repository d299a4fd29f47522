#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "msa/homography.hpp"
#include "msa/image.hpp"
#include "msa/motion_gt.hpp"
#include "msa/rng.hpp"

namespace msa {

enum class ShapeKind { circle, square, triangle };

struct ObjectSpec {
    ShapeKind kind = ShapeKind::circle;
    std::array<float, 3> color{0.9f, 0.2f, 0.2f};
    double size_px = 16;  // diameter / side length
    Vec2 velocity{0, 0};  // px/frame in world coordinates
    Vec2 start{0, 0};     // world center at t=0
    std::uint64_t texture_seed = 0;  // object-local pattern, moves with the object
};

struct CameraMotion {
    double translate_amp = 1.5;  // px, per-frame delta bounded by amp*omega <= 2
    double rotate_amp_deg = 0.5;
    double phase_x = 0, phase_y = 0, phase_r = 0;
    double pan_x = 0, pan_y = 0;  // linear drift, px/frame
};

struct SceneSpec {
    int h = 90, w = 120;
    int t_frames = 30;
    std::uint64_t texture_seed = 1;
    std::vector<ObjectSpec> objects;
    CameraMotion camera;
    int label = 0, verb = 0, noun = 0;
};

struct VideoClip {
    int t = 0, h = 0, w = 0;
    std::vector<ImageRGB> frames;
    std::vector<MaskU8> object_masks;     // exact per-frame object masks
    std::vector<Homography> image_to_world;  // per-frame camera placement
};

// Renders the scene: procedural background, antialiased textured shapes,
// per-frame camera homography. A pure function of the spec; all randomness
// lives in the seeds it carries.
VideoClip gen_clip(const SceneSpec& spec);

// Ground-truth homography mapping image coords of frame t to frame t+1.
Homography true_pair_homography(const VideoClip& clip, int t);

struct DatasetConfig {
    std::vector<std::string> verbs{"left", "right", "up"};
    std::vector<std::string> nouns{"circle", "square"};
    int train_per_class = 40;
    int test_per_class = 10;
    int h = 90, w = 120;
    int t_frames = 30;
    int n_frames = 7;   // sampled frames per clip; fixes motion_maps.sptn rows
    int map_s = 4;      // grid of the stored canonical maps
    double speed = 2.0;           // object px/frame
    double size_min = 12, size_max = 16;
    double cam_translate = 1.5;   // camera sweep amplitude, px
    double cam_rotate_deg = 0.5;
    int workers = 1;
    MotionGtParams gt;
};

struct ManifestEntry {
    std::string clip_id;
    std::string path;  // relative to dataset root
    int label = 0, verb = 0, noun = 0;
    std::string split;  // "train" | "test"
    int t = 0;
};

struct DatasetManifest {
    int version = 1;
    std::vector<std::string> classes;  // "<verb>_<noun>"
    std::vector<std::string> verbs, nouns;
    std::vector<ManifestEntry> entries;
};

// Generates all clips plus their unsupervised motion ground truth and writes
// the on-disk layout; the manifest is written last by the calling thread.
DatasetManifest gen_dataset(const DatasetConfig& config, std::uint64_t seed,
                            const std::filesystem::path& root);

DatasetManifest load_manifest(const std::filesystem::path& root);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& root);

// Recomputes motion masks/maps for every clip of an existing dataset.
void regenerate_motion_maps(const std::filesystem::path& root, const DatasetConfig& config,
                            std::uint64_t seed);

// Per-clip file names.
std::string mask_file_name(int frame_idx);
std::string motion_mask_file_name(int frame_idx);

}  // namespace msa
