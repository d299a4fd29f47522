#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "msa/tensor.hpp"

namespace msa {

// SPTN v1 tensor container (little-endian):
//   magic "SPTN" (53 50 54 4E) | u32 version=1 | u8 dtype (0=f32,1=f64,2=u8)
//   u8 ndim | 2 zero pad bytes | ndim x u64 extents | row-major payload
struct SptnHeader {
    Dtype dtype;
    Shape shape;
};

SptnHeader read_sptn_header(const std::filesystem::path& path);

template <typename T>
void write_sptn(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> read_sptn(const std::filesystem::path& path);

void write_sptn_u8(const std::filesystem::path& path, const Shape& shape,
                   const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> read_sptn_u8(const std::filesystem::path& path, Shape* shape_out);

extern template void write_sptn<float>(const std::filesystem::path&, const Tensor<float>&);
extern template void write_sptn<double>(const std::filesystem::path&, const Tensor<double>&);
extern template Tensor<float> read_sptn<float>(const std::filesystem::path&);
extern template Tensor<double> read_sptn<double>(const std::filesystem::path&);

}  // namespace msa
