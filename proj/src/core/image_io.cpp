// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "image_io.hpp"

#include "error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace hsplat {

namespace {

png_uint_32
formatFor(int channels) {
    switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throwInvalid("png: unsupported channel count " + std::to_string(channels));
    }
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

std::vector<std::uint8_t>
readFileBytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throwParse("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void
writeFileBytes(const std::filesystem::path &path, const void *data, std::size_t size) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throwRuntime("cannot write " + path.string());
    out.write(static_cast<const char *>(data), static_cast<std::streamsize>(size));
    if (!out)
        throwRuntime("write failed: " + path.string());
}

std::vector<std::uint8_t>
encodePng(const Image &image) {
    if (image.width <= 0 || image.height <= 0)
        throwInvalid("png: image is empty");
    std::vector<std::uint8_t> pixels(image.data.size());
    std::transform(image.data.begin(), image.data.end(), pixels.begin(), quantize);

    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width   = static_cast<png_uint_32>(image.width);
    png.height  = static_cast<png_uint_32>(image.height);
    png.format  = formatFor(image.channels);

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throwRuntime(std::string("png encode: ") + png.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throwRuntime(std::string("png encode: ") + png.message);
    out.resize(size);
    return out;
}

void
savePng(const Image &image, const std::filesystem::path &path) {
    const auto bytes = encodePng(image);
    writeFileBytes(path, bytes.data(), bytes.size());
}

Image
decodePng(const std::vector<std::uint8_t> &bytes, int channels) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throwParse(std::string("png decode: ") + png.message);
    png.format = formatFor(channels);
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&png);
        throwParse(std::string("png decode: ") + png.message);
    }
    Image out(static_cast<int>(png.width), static_cast<int>(png.height), channels);
    std::transform(pixels.begin(), pixels.end(), out.data.begin(),
                   [](std::uint8_t v) { return v / 255.0; });
    return out;
}

Image
loadPng(const std::filesystem::path &path, int channels) {
    try {
        return decodePng(readFileBytes(path), channels);
    } catch (const Error &e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

Image
loadMask(const std::filesystem::path &path) {
    Image gray = loadPng(path, 1);
    for (double &v : gray.data)
        v = v > 0.0 ? 1.0 : 0.0;
    return gray;
}

void
saveRaster(const Image &image, const std::filesystem::path &path) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double d : image.data) {
        const double v = static_cast<float>(d);
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (lo > hi)
        lo = hi = 0.0;
    std::ostringstream header;
    header.precision(9);
    header << "headsplat-raster 1\nwidth " << image.width << "\nheight " << image.height
           << "\nchannels " << image.channels << "\nmin " << lo << "\nmax " << hi << "\nend\n";
    std::string bytes = header.str();
    const std::size_t offset = bytes.size();
    bytes.resize(offset + image.data.size() * 4);
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const float f = static_cast<float>(image.data[i]);
        std::memcpy(&bytes[offset + 4 * i], &f, 4);
    }
    writeFileBytes(path, bytes.data(), bytes.size());
}

Image
loadRaster(const std::filesystem::path &path) {
    const auto bytes = readFileBytes(path);
    const std::string text(bytes.begin(), bytes.end());
    const auto endPos = text.find("\nend\n");
    if (text.rfind("headsplat-raster 1\n", 0) != 0 || endPos == std::string::npos)
        throwParse(path.string() + ": not a headsplat raster");
    std::istringstream header(text.substr(0, endPos));
    std::string magic, version, key;
    header >> magic >> version;
    int width = -1, height = -1, channels = -1;
    double lo = 0.0, hi = 0.0;
    while (header >> key) {
        if (key == "width")
            header >> width;
        else if (key == "height")
            header >> height;
        else if (key == "channels")
            header >> channels;
        else if (key == "min")
            header >> lo;
        else if (key == "max")
            header >> hi;
        else
            throwParse(path.string() + ": unknown raster header key '" + key + "'");
    }
    if (width < 0 || height < 0 || channels <= 0)
        throwParse(path.string() + ": raster header missing width/height/channels");
    Image out(width, height, channels);
    const std::size_t offset = endPos + 5;
    if (bytes.size() - offset != out.data.size() * 4)
        throwParse(path.string() + ": raster payload size mismatch");
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        float f;
        std::memcpy(&f, &bytes[offset + 4 * i], 4);
        out.data[i] = f;
    }
    return out;
}

} // namespace hsplat
