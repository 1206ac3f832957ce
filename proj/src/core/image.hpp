// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace hsplat {

/// Interleaved row-major image of doubles.
struct Image {
    int width    = 0;
    int height   = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                   static_cast<std::size_t>(c),
               fill) {}

    std::size_t
    index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }

    double &
    at(int x, int y, int c = 0) {
        return data[index(x, y, c)];
    }
    double
    at(int x, int y, int c = 0) const {
        return data[index(x, y, c)];
    }

    std::size_t
    pixelCount() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    bool
    sameShape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

} // namespace hsplat
