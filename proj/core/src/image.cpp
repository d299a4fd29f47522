#include "msa/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "msa/error.hpp"

namespace msa {

ImageF to_gray(const ImageRGB& rgb) {
    ImageF g(rgb.h, rgb.w);
    const std::size_t hw = static_cast<std::size_t>(rgb.h) * rgb.w;
    for (std::size_t i = 0; i < hw; ++i)
        g.v[i] = 0.299f * rgb.v[i] + 0.587f * rgb.v[hw + i] + 0.114f * rgb.v[2 * hw + i];
    return g;
}

float sample_bilinear(const ImageF& img, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, img.h - 1), x1 = std::min(x0 + 1, img.w - 1);
    const double fy = y - y0, fx = x - x0;
    const double a = img.at(y0, x0) * (1 - fx) + img.at(y0, x1) * fx;
    const double b = img.at(y1, x0) * (1 - fx) + img.at(y1, x1) * fx;
    return static_cast<float>(a * (1 - fy) + b * fy);
}

namespace {

// Source coordinate for output pixel i under edge-aligned scaling.
inline double src_coord(int i, double scale) { return (i + 0.5) * scale - 0.5; }

}  // namespace

ImageF resize_bilinear(const ImageF& img, int oh, int ow) {
    if (oh < 1 || ow < 1) throw GeometryError("resize_bilinear: output extent < 1");
    ImageF out(oh, ow);
    const double sy = static_cast<double>(img.h) / oh;
    const double sx = static_cast<double>(img.w) / ow;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(y, x) = sample_bilinear(img, src_coord(y, sy), src_coord(x, sx));
    return out;
}

ImageRGB resize_bilinear(const ImageRGB& img, int oh, int ow) {
    if (oh < 1 || ow < 1) throw GeometryError("resize_bilinear: output extent < 1");
    ImageRGB out(oh, ow);
    const double sy = static_cast<double>(img.h) / oh;
    const double sx = static_cast<double>(img.w) / ow;
    // reuse the single-channel path per plane
    for (int c = 0; c < 3; ++c) {
        ImageF plane(img.h, img.w);
        std::copy_n(img.v.begin() + static_cast<std::size_t>(c) * img.h * img.w,
                    static_cast<std::size_t>(img.h) * img.w, plane.v.begin());
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out.at(c, y, x) = sample_bilinear(plane, src_coord(y, sy), src_coord(x, sx));
    }
    return out;
}

ImageRGB crop(const ImageRGB& img, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > img.h || x0 + cw > img.w)
        throw GeometryError("crop rectangle out of bounds");
    ImageRGB out(ch, cw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

ImageRGB flip_horizontal(const ImageRGB& img) {
    ImageRGB out(img.h, img.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
    return out;
}

void write_pgm(const std::filesystem::path& path, const MaskU8& mask) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "P5\n" << mask.w << " " << mask.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(mask.m.data()),
            static_cast<std::streamsize>(mask.m.size()));
    if (!f) throw IoError("short write: " + path.string());
}

MaskU8 read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::string magic;
    f >> magic;
    if (magic != "P5") throw IoError("not a binary PGM: " + path.string());
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    if (!f || w < 1 || h < 1 || maxval != 255) throw IoError("bad PGM header: " + path.string());
    f.get();  // single whitespace after maxval
    MaskU8 mask(h, w);
    f.read(reinterpret_cast<char*>(mask.m.data()), static_cast<std::streamsize>(mask.m.size()));
    if (!f) throw IoError("truncated PGM payload: " + path.string());
    return mask;
}

void write_ppm(const std::filesystem::path& path, const ImageRGB& img) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.f, 1.f);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.f));
            }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("short write: " + path.string());
}

double mask_iou(const MaskU8& a, const MaskU8& b) {
    if (a.h != b.h || a.w != b.w) throw ShapeError("mask_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        const bool pa = a.m[i] != 0, pb = b.m[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace msa
