#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tomo/tomogram.hpp"

namespace tomo {

/// Layered grid archive ("LGA1"), little-endian:
///   magic[4] u32 version=1 u32 rows u32 cols f32 resolution f64 origin_x
///   f64 origin_y f64 z_min f32 d_s u32 slice_count
///   per slice: f64 plane_height u8 layer_mask (1 ground, 2 ceiling, 4 cost),
///   then each present layer as rows*cols f32 row-major, NaN = invalid.
std::vector<std::uint8_t> encode_archive(const Tomogram& tomogram);
Tomogram decode_archive(std::span<const std::uint8_t> bytes);

void save_archive(const Tomogram& tomogram, const std::filesystem::path& path);
Tomogram load_archive(const std::filesystem::path& path);

inline constexpr std::uint8_t kLayerGround = 1;
inline constexpr std::uint8_t kLayerCeiling = 2;
inline constexpr std::uint8_t kLayerCost = 4;

}  // namespace tomo
