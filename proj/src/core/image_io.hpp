// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// 8-bit PNG and 32-bit float raster I/O.

#pragma once

#include "image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hsplat {

/// Quantizes [0, 1] values (clamped) to 8 bits. 1, 3 or 4 channels.
std::vector<std::uint8_t> encodePng(const Image &image);
void savePng(const Image &image, const std::filesystem::path &path);

/// Decodes to `channels` (1 gray, 3 RGB, 4 RGBA) values in [0, 1].
Image decodePng(const std::vector<std::uint8_t> &bytes, int channels = 3);
Image loadPng(const std::filesystem::path &path, int channels = 3);

/// Binary mask: 1 where the gray value is nonzero, else 0.
Image loadMask(const std::filesystem::path &path);

/// Float raster: text header (magic, width, height, channels, min, max)
/// followed by little-endian float32 samples, row-major interleaved.
void saveRaster(const Image &image, const std::filesystem::path &path);
Image loadRaster(const std::filesystem::path &path);

std::vector<std::uint8_t> readFileBytes(const std::filesystem::path &path);
void writeFileBytes(const std::filesystem::path &path, const void *data, std::size_t size);

} // namespace hsplat
