#include "msa/sptn.hpp"

#include <cstring>
#include <fstream>

#include "msa/error.hpp"

namespace msa {

namespace {

constexpr std::uint8_t kMagic[4] = {0x53, 0x50, 0x54, 0x4E};  // "SPTN"
constexpr std::uint32_t kVersion = 1;

void write_header(std::ofstream& f, Dtype dtype, const Shape& shape) {
    f.write(reinterpret_cast<const char*>(kMagic), 4);
    const std::uint32_t version = kVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    const std::uint8_t nd = static_cast<std::uint8_t>(shape.size());
    const std::uint8_t pad[2] = {0, 0};
    f.write(reinterpret_cast<const char*>(&dt), 1);
    f.write(reinterpret_cast<const char*>(&nd), 1);
    f.write(reinterpret_cast<const char*>(pad), 2);
    for (auto e : shape) {
        const std::uint64_t ext = static_cast<std::uint64_t>(e);
        f.write(reinterpret_cast<const char*>(&ext), 8);
    }
}

SptnHeader read_header(std::ifstream& f, const std::filesystem::path& path) {
    std::uint8_t magic[4];
    f.read(reinterpret_cast<char*>(magic), 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not an SPTN file: " + path.string());
    std::uint32_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion)
        throw IoError("unsupported SPTN version " + std::to_string(version) + " in " +
                      path.string());
    std::uint8_t dt = 0, nd = 0, pad[2];
    f.read(reinterpret_cast<char*>(&dt), 1);
    f.read(reinterpret_cast<char*>(&nd), 1);
    f.read(reinterpret_cast<char*>(pad), 2);
    if (dt > 2) throw IoError("unknown SPTN dtype in " + path.string());
    SptnHeader h;
    h.dtype = static_cast<Dtype>(dt);
    h.shape.resize(nd);
    for (auto& e : h.shape) {
        std::uint64_t ext = 0;
        f.read(reinterpret_cast<char*>(&ext), 8);
        e = static_cast<std::int64_t>(ext);
    }
    if (!f) throw IoError("truncated SPTN header in " + path.string());
    return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    return f;
}

const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::f32: return "f32";
        case Dtype::f64: return "f64";
        default: return "u8";
    }
}

}  // namespace

SptnHeader read_sptn_header(const std::filesystem::path& path) {
    auto f = open_in(path);
    return read_header(f, path);
}

template <typename T>
void write_sptn(const std::filesystem::path& path, const Tensor<T>& t) {
    auto f = open_out(path);
    write_header(f, dtype_of<T>(), t.shape());
    f.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(T)));
    if (!f) throw IoError("short write: " + path.string());
}

template <typename T>
Tensor<T> read_sptn(const std::filesystem::path& path) {
    auto f = open_in(path);
    const SptnHeader h = read_header(f, path);
    if (h.dtype != dtype_of<T>())
        throw IoError("SPTN dtype mismatch in " + path.string() + ": file has " +
                      dtype_name(h.dtype));
    std::vector<T> data(static_cast<std::size_t>(numel(h.shape)));
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!f) throw IoError("truncated SPTN payload in " + path.string());
    return Tensor<T>::from_data(h.shape, std::move(data));
}

void write_sptn_u8(const std::filesystem::path& path, const Shape& shape,
                   const std::vector<std::uint8_t>& data) {
    if (static_cast<std::int64_t>(data.size()) != numel(shape))
        throw ShapeError("write_sptn_u8: data length does not match shape " + shape_str(shape));
    auto f = open_out(path);
    write_header(f, Dtype::u8, shape);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("short write: " + path.string());
}

std::vector<std::uint8_t> read_sptn_u8(const std::filesystem::path& path, Shape* shape_out) {
    auto f = open_in(path);
    const SptnHeader h = read_header(f, path);
    if (h.dtype != Dtype::u8)
        throw IoError("SPTN dtype mismatch in " + path.string() + ": expected u8, file has " +
                      dtype_name(h.dtype));
    std::vector<std::uint8_t> data(static_cast<std::size_t>(numel(h.shape)));
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("truncated SPTN payload in " + path.string());
    if (shape_out) *shape_out = h.shape;
    return data;
}

template void write_sptn<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_sptn<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_sptn<float>(const std::filesystem::path&);
template Tensor<double> read_sptn<double>(const std::filesystem::path&);

}  // namespace msa
