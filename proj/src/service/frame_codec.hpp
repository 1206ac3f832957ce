// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Binary frame messages: a 24-byte little-endian header followed by a PNG
// or raw RGBA payload.

#pragma once

#include "image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hsplat {

inline constexpr std::uint32_t kFrameMagic      = 0x52465348; // "HSFR" on the wire
inline constexpr std::size_t kFrameHeaderBytes = 24;

enum class FrameFormat : std::uint32_t { kPng = 1, kRgba = 2 };

FrameFormat frameFormatFromName(const std::string &name);
const char *frameFormatName(FrameFormat format);

struct FrameHeader {
    std::uint32_t magic         = kFrameMagic;
    std::uint32_t frameId       = 0;
    std::uint32_t width         = 0;
    std::uint32_t height        = 0;
    std::uint32_t format        = 0;
    std::uint32_t payloadLength = 0;
};

/// `color` is RGB, `alpha` one channel (or empty for opaque). Values are
/// clamped to [0, 1] and quantized to 8 bits.
std::vector<std::uint8_t> encodeFrame(const Image &color, const Image &alpha,
                                      std::uint32_t frameId, FrameFormat format);
std::vector<std::uint8_t> encodeFrame(const Image &color, const Image &alpha,
                                      std::uint32_t frameId, std::uint32_t formatTag);

FrameHeader parseFrameHeader(const std::vector<std::uint8_t> &message);

/// Decodes a frame message to RGBA in [0, 1].
Image decodeFrame(const std::vector<std::uint8_t> &message, FrameHeader *header = nullptr);

} // namespace hsplat
