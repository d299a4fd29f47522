#include "msa/sampling.hpp"

#include <cmath>

#include "msa/error.hpp"

namespace msa {

std::vector<int> sample_frames(int t_total, int n, bool train, RngStream* aug) {
    if (n < 1) throw ContractError("sample_frames: n must be >= 1");
    if (n > t_total)
        throw ContractError("sample_frames: cannot draw " + std::to_string(n) + " frames from " +
                            std::to_string(t_total));
    std::vector<int> idx(static_cast<std::size_t>(n));
    if (train) {
        if (!aug) throw ContractError("sample_frames: train mode needs the augmentation stream");
        for (int k = 0; k < n; ++k) {
            const int lo = static_cast<int>(static_cast<std::int64_t>(k) * t_total / n);
            const int hi = static_cast<int>(static_cast<std::int64_t>(k + 1) * t_total / n) - 1;
            idx[static_cast<std::size_t>(k)] = static_cast<int>(aug->uniform_int(lo, hi));
        }
    } else {
        for (int k = 0; k < n; ++k)
            idx[static_cast<std::size_t>(k)] = static_cast<int>(
                std::floor(static_cast<double>(k) * t_total / n + t_total / (2.0 * n)));
    }
    return idx;
}

namespace {

int resized_width(int native_h, int native_w, int resize_h) {
    return static_cast<int>(std::lround(static_cast<double>(native_w) * resize_h / native_h));
}

}  // namespace

FrameTransform test_transform(int native_h, int native_w, int resize_h, int out_size) {
    const int rw = resized_width(native_h, native_w, resize_h);
    if (resize_h < out_size || rw < out_size)
        throw ConfigError("test_transform: resized frame " + std::to_string(resize_h) + "x" +
                          std::to_string(rw) + " smaller than crop " + std::to_string(out_size));
    FrameTransform t;
    t.resize_h = resize_h;
    t.crop_size = out_size;
    t.out_size = out_size;
    t.crop_y = (resize_h - out_size) / 2;
    t.crop_x = (rw - out_size) / 2;
    t.flip = false;
    return t;
}

FrameTransform draw_augmentation(int native_h, int native_w, int resize_h, int out_size,
                                 RngStream& aug) {
    static constexpr double kScales[3] = {1.0, 0.875, 0.75};
    const int rw = resized_width(native_h, native_w, resize_h);

    FrameTransform t;
    t.resize_h = resize_h;
    t.out_size = out_size;
    const double s = kScales[aug.uniform_int(0, 2)];
    t.crop_size = static_cast<int>(std::lround(out_size * s));
    if (resize_h < t.crop_size || rw < t.crop_size)
        throw ConfigError("draw_augmentation: crop larger than resized frame");

    const int maxy = resize_h - t.crop_size;
    const int maxx = rw - t.crop_size;
    switch (aug.uniform_int(0, 4)) {  // 4 corners + center
        case 0: t.crop_y = 0; t.crop_x = 0; break;
        case 1: t.crop_y = 0; t.crop_x = maxx; break;
        case 2: t.crop_y = maxy; t.crop_x = 0; break;
        case 3: t.crop_y = maxy; t.crop_x = maxx; break;
        default: t.crop_y = maxy / 2; t.crop_x = maxx / 2; break;
    }
    t.flip = aug.bernoulli(0.5);
    return t;
}

Tensor<float> preprocess_frame(const ImageRGB& native, const FrameTransform& t) {
    const int rw = resized_width(native.h, native.w, t.resize_h);
    if (t.resize_h < t.crop_size || rw < t.crop_size)
        throw ConfigError("preprocess_frame: frame smaller than crop after resize");
    ImageRGB img = resize_bilinear(native, t.resize_h, rw);
    img = crop(img, t.crop_y, t.crop_x, t.crop_size, t.crop_size);
    if (t.crop_size != t.out_size) img = resize_bilinear(img, t.out_size, t.out_size);
    if (t.flip) img = flip_horizontal(img);
    std::vector<float> data(img.v.begin(), img.v.end());
    return Tensor<float>::from_data({3, t.out_size, t.out_size}, std::move(data));
}

MotionMap map_for_transform(const MaskU8& native_mask, const FrameTransform& t, int s) {
    // crop rectangle mapped back into native coordinates
    const double scale = static_cast<double>(native_mask.h) / t.resize_h;
    const double y0 = t.crop_y * scale;
    const double x0 = t.crop_x * scale;
    const double side = t.crop_size * scale;
    return rasterize_mask_rect(native_mask, y0, x0, side, side, t.flip, s);
}

}  // namespace msa
