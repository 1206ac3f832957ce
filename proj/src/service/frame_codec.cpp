// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "frame_codec.hpp"

#include "error.hpp"
#include "image_io.hpp"

#include <cmath>

namespace hsplat {

namespace {

void
putU32(std::vector<std::uint8_t> &out, std::size_t at, std::uint32_t v) {
    for (int b = 0; b < 4; ++b)
        out[at + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(v >> (8 * b));
}

std::uint32_t
getU32(const std::vector<std::uint8_t> &in, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(b)]) << (8 * b);
    return v;
}

std::uint8_t
quantize(double v) {
    if (!(v > 0.0))
        return 0;
    if (v >= 1.0)
        return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

} // namespace

FrameFormat
frameFormatFromName(const std::string &name) {
    if (name == "png")
        return FrameFormat::kPng;
    if (name == "rgba")
        return FrameFormat::kRgba;
    throwInvalid("unknown frame format '" + name + "' (expected png or rgba)");
}

const char *
frameFormatName(FrameFormat format) {
    return format == FrameFormat::kPng ? "png" : "rgba";
}

std::vector<std::uint8_t>
encodeFrame(const Image &color, const Image &alpha, std::uint32_t frameId, std::uint32_t formatTag) {
    if (formatTag != static_cast<std::uint32_t>(FrameFormat::kPng) &&
        formatTag != static_cast<std::uint32_t>(FrameFormat::kRgba))
        throwInvalid("encode_frame: unknown format tag " + std::to_string(formatTag));
    return encodeFrame(color, alpha, frameId, static_cast<FrameFormat>(formatTag));
}

std::vector<std::uint8_t>
encodeFrame(const Image &color, const Image &alpha, std::uint32_t frameId, FrameFormat format) {
    if (color.width <= 0 || color.height <= 0)
        throwInvalid("encode_frame: image is empty");
    HS_CHECK_INPUT(color.channels == 3, "encode_frame: color must be RGB");
    const bool hasAlpha = !alpha.data.empty();
    HS_CHECK_INPUT(!hasAlpha || (alpha.width == color.width && alpha.height == color.height &&
                                 alpha.channels == 1),
                   "encode_frame: alpha does not match color");

    std::vector<std::uint8_t> payload;
    if (format == FrameFormat::kRgba) {
        payload.resize(color.pixelCount() * 4);
        for (std::size_t p = 0; p < color.pixelCount(); ++p) {
            for (std::size_t c = 0; c < 3; ++c)
                payload[p * 4 + c] = quantize(color.data[p * 3 + c]);
            payload[p * 4 + 3] = hasAlpha ? quantize(alpha.data[p]) : 255;
        }
    } else if (format == FrameFormat::kPng) {
        Image rgba(color.width, color.height, 4);
        for (std::size_t p = 0; p < color.pixelCount(); ++p) {
            for (std::size_t c = 0; c < 3; ++c)
                rgba.data[p * 4 + c] = color.data[p * 3 + c];
            rgba.data[p * 4 + 3] = hasAlpha ? alpha.data[p] : 1.0;
        }
        payload = encodePng(rgba);
    } else {
        throwInvalid("encode_frame: unknown format tag " +
                     std::to_string(static_cast<std::uint32_t>(format)));
    }

    std::vector<std::uint8_t> out(kFrameHeaderBytes + payload.size());
    putU32(out, 0, kFrameMagic);
    putU32(out, 4, frameId);
    putU32(out, 8, static_cast<std::uint32_t>(color.width));
    putU32(out, 12, static_cast<std::uint32_t>(color.height));
    putU32(out, 16, static_cast<std::uint32_t>(format));
    putU32(out, 20, static_cast<std::uint32_t>(payload.size()));
    std::copy(payload.begin(), payload.end(), out.begin() + kFrameHeaderBytes);
    return out;
}

FrameHeader
parseFrameHeader(const std::vector<std::uint8_t> &message) {
    if (message.size() < kFrameHeaderBytes)
        throwParse("frame: message shorter than the header");
    FrameHeader h;
    h.magic         = getU32(message, 0);
    h.frameId       = getU32(message, 4);
    h.width         = getU32(message, 8);
    h.height        = getU32(message, 12);
    h.format        = getU32(message, 16);
    h.payloadLength = getU32(message, 20);
    if (h.magic != kFrameMagic)
        throwParse("frame: bad magic");
    if (message.size() - kFrameHeaderBytes != h.payloadLength)
        throwParse("frame: payload length mismatch");
    return h;
}

Image
decodeFrame(const std::vector<std::uint8_t> &message, FrameHeader *header) {
    const FrameHeader h = parseFrameHeader(message);
    if (header)
        *header = h;
    const std::vector<std::uint8_t> payload(message.begin() + kFrameHeaderBytes, message.end());
    if (h.format == static_cast<std::uint32_t>(FrameFormat::kPng)) {
        Image img = decodePng(payload, 4);
        if (img.width != static_cast<int>(h.width) || img.height != static_cast<int>(h.height))
            throwParse("frame: PNG size does not match the header");
        return img;
    }
    if (h.format == static_cast<std::uint32_t>(FrameFormat::kRgba)) {
        if (payload.size() != static_cast<std::size_t>(h.width) * h.height * 4)
            throwParse("frame: RGBA payload size mismatch");
        Image img(static_cast<int>(h.width), static_cast<int>(h.height), 4);
        for (std::size_t i = 0; i < payload.size(); ++i)
            img.data[i] = payload[i] / 255.0;
        return img;
    }
    throwParse("frame: unknown format tag " + std::to_string(h.format));
}

} // namespace hsplat
