#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace msa {

struct Vec2 {
    double x = 0, y = 0;
};

// Single-channel float image, row-major, values nominally in [0,1].
struct ImageF {
    int h = 0, w = 0;
    std::vector<float> v;

    ImageF() = default;
    ImageF(int hh, int ww, float fill = 0.f) : h(hh), w(ww), v(static_cast<std::size_t>(hh) * ww, fill) {}

    float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Planar RGB float image: channel c at v[c*h*w + y*w + x].
struct ImageRGB {
    int h = 0, w = 0;
    std::vector<float> v;

    ImageRGB() = default;
    ImageRGB(int hh, int ww) : h(hh), w(ww), v(static_cast<std::size_t>(3) * hh * ww, 0.f) {}

    float& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * h + y) * w + x]; }
    float at(int c, int y, int x) const { return v[(static_cast<std::size_t>(c) * h + y) * w + x]; }
};

// Binary/byte mask, 0 = background, 255 = foreground.
struct MaskU8 {
    int h = 0, w = 0;
    std::vector<std::uint8_t> m;

    MaskU8() = default;
    MaskU8(int hh, int ww, std::uint8_t fill = 0) : h(hh), w(ww), m(static_cast<std::size_t>(hh) * ww, fill) {}

    std::uint8_t& at(int y, int x) { return m[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return m[static_cast<std::size_t>(y) * w + x]; }
};

ImageF to_gray(const ImageRGB& rgb);

// Bilinear sample with border clamp.
float sample_bilinear(const ImageF& img, double y, double x);

ImageF resize_bilinear(const ImageF& img, int oh, int ow);
ImageRGB resize_bilinear(const ImageRGB& img, int oh, int ow);

ImageRGB crop(const ImageRGB& img, int y0, int x0, int ch, int cw);
ImageRGB flip_horizontal(const ImageRGB& img);

// Binary PGM (P5) and PPM (P6), maxval 255.
void write_pgm(const std::filesystem::path& path, const MaskU8& mask);
MaskU8 read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRGB& img);

double mask_iou(const MaskU8& a, const MaskU8& b);

}  // namespace msa
