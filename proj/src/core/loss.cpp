// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "loss.hpp"

#include "error.hpp"
#include "image_io.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace hsplat {

namespace {

constexpr int kWindow     = 11;
constexpr double kSigma   = 1.5;
constexpr double kC1      = 0.01 * 0.01;
constexpr double kC2      = 0.03 * 0.03;

const std::array<double, kWindow> &
window1d() {
    static const std::array<double, kWindow> w = [] {
        std::array<double, kWindow> k{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kWindow / 2;
            k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += k[static_cast<std::size_t>(i)];
        }
        for (double &v : k)
            v /= sum;
        return k;
    }();
    return w;
}

// Separable zero-padded Gaussian filter of a single-channel plane.
std::vector<double>
blur(const std::vector<double> &src, int width, int height) {
    const auto &w = window1d();
    const int r   = kWindow / 2;
    std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width)
                    acc += w[static_cast<std::size_t>(k + r)] * src[static_cast<std::size_t>(y * width + xx)];
            }
            tmp[static_cast<std::size_t>(y * width + x)] = acc;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height)
                    acc += w[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy * width + x)];
            }
            out[static_cast<std::size_t>(y * width + x)] = acc;
        }
    return out;
}

void
checkShapes(const Image &a, const Image &b, const Image &mask) {
    HS_CHECK_INPUT(a.sameShape(b), "loss: rendered and guidance images differ in shape");
    HS_CHECK_INPUT(a.channels == 3, "loss: images must be RGB");
    HS_CHECK_INPUT(mask.width == a.width && mask.height == a.height && mask.channels == 1,
                   "loss: mask does not match the image size");
}

double
maskCount(const Image &mask) {
    double m = 0.0;
    for (double v : mask.data)
        m += v;
    return m;
}

} // namespace

double
maskedL1(const Image &a, const Image &b, const Image &mask, Image *gradA) {
    checkShapes(a, b, mask);
    const double m = maskCount(mask);
    if (gradA)
        *gradA = Image(a.width, a.height, 3);
    if (m <= 0.0)
        return 0.0;
    const double norm = 1.0 / (3.0 * m);
    double sum        = 0.0;
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
        const double w = mask.data[p];
        if (w == 0.0)
            continue;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double d = a.data[p * 3 + ch] - b.data[p * 3 + ch];
            sum += w * std::abs(d);
            if (gradA)
                gradA->data[p * 3 + ch] = w * norm * static_cast<double>((d > 0.0) - (d < 0.0));
        }
    }
    return sum * norm;
}

double
maskedSsim(const Image &a, const Image &b, const Image &mask, Image *gradA) {
    checkShapes(a, b, mask);
    const int w = a.width, h = a.height;
    const std::size_t n = a.pixelCount();
    const double m      = maskCount(mask);
    if (gradA)
        *gradA = Image(w, h, 3);
    if (m <= 0.0)
        return 1.0;
    const double norm = 1.0 / (3.0 * m);

    double total = 0.0;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t p = 0; p < n; ++p) {
            x[p]  = a.data[p * 3 + ch];
            y[p]  = b.data[p * 3 + ch];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mux = blur(x, w, h), muy = blur(y, w, h);
        const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);

        // dS/dmux, dS/dE[x^2], dS/dE[xy] per pixel, pre-multiplied by g = mask * norm.
        std::vector<double> ga(n), gb(n), gc(n), gbmu(n), gcmu(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double sx  = exx[p] - mux[p] * mux[p];
            const double sy  = eyy[p] - muy[p] * muy[p];
            const double sxy = exy[p] - mux[p] * muy[p];
            const double a1  = 2.0 * mux[p] * muy[p] + kC1;
            const double a2  = 2.0 * sxy + kC2;
            const double b1  = mux[p] * mux[p] + muy[p] * muy[p] + kC1;
            const double b2  = sx + sy + kC2;
            const double s   = (a1 * a2) / (b1 * b2);
            const double g   = mask.data[p] * norm;
            total += g * s;
            if (!gradA)
                continue;
            const double da = 2.0 * muy[p] * a2 / (b1 * b2) - 2.0 * mux[p] * s / b1;
            const double db = -s / b2;
            const double dc = 2.0 * a1 / (b1 * b2);
            ga[p]   = g * da;
            gb[p]   = g * db;
            gc[p]   = g * dc;
            gbmu[p] = g * db * mux[p];
            gcmu[p] = g * dc * muy[p];
        }
        if (!gradA)
            continue;
        const auto wa = blur(ga, w, h), wb = blur(gb, w, h), wc = blur(gc, w, h);
        const auto wbmu = blur(gbmu, w, h), wcmu = blur(gcmu, w, h);
        for (std::size_t p = 0; p < n; ++p)
            gradA->data[p * 3 + ch] =
                wa[p] + 2.0 * x[p] * wb[p] - 2.0 * wbmu[p] + y[p] * wc[p] - wcmu[p];
    }
    return total;
}

LossValue
computeLoss(const Image &rendered, const Image &guidance, const Image &mask,
            const LossWeights &weights, const LossHook *hook) {
    HS_CHECK_INPUT(weights.l1 >= 0.0 && weights.ssim >= 0.0 && weights.hook >= 0.0,
                   "loss: weights must be >= 0");
    checkShapes(rendered, guidance, mask);
    LossValue out;
    out.grad = Image(rendered.width, rendered.height, 3);

    Image g;
    if (weights.l1 > 0.0) {
        out.l1 = maskedL1(rendered, guidance, mask, &g);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            out.grad.data[i] += weights.l1 * g.data[i];
    } else {
        out.l1 = maskedL1(rendered, guidance, mask);
    }

    if (maskCount(mask) > 0.0) {
        // Identical images are the exact optimum of both terms; skip the
        // SSIM gradient there rather than return its rounding residue.
        if (weights.ssim > 0.0 && rendered.data != guidance.data) {
            out.ssim = 1.0 - maskedSsim(rendered, guidance, mask, &g);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                out.grad.data[i] -= weights.ssim * g.data[i];
        } else {
            out.ssim = 1.0 - maskedSsim(rendered, guidance, mask);
        }
    }

    if (hook && hook->enabled() && weights.hook > 0.0) {
        const auto dir = hook->workDir.empty() ? std::filesystem::temp_directory_path() / "headsplat-hook"
                                               : hook->workDir;
        std::filesystem::create_directories(dir);
        saveRaster(rendered, dir / "rendered.raster");
        saveRaster(guidance, dir / "guidance.raster");
        saveRaster(mask, dir / "mask.raster");
        const std::string cmd = hook->command + " '" + (dir / "rendered.raster").string() + "' '" +
                                (dir / "guidance.raster").string() + "' '" +
                                (dir / "mask.raster").string() + "' '" + dir.string() + "'";
        if (std::system(cmd.c_str()) != 0)
            throwRuntime("loss hook failed: " + hook->command);
        std::ifstream lossIn(dir / "loss.txt");
        if (!(lossIn >> out.hook))
            throwParse("loss hook: unreadable loss.txt");
        const Image hg = loadRaster(dir / "grad.raster");
        HS_CHECK_INPUT(hg.sameShape(rendered), "loss hook: gradient raster has the wrong shape");
        for (std::size_t i = 0; i < hg.data.size(); ++i)
            out.grad.data[i] += weights.hook * hg.data[i];
    }

    out.total = weights.l1 * out.l1 + weights.ssim * out.ssim + weights.hook * out.hook;
    for (double v : out.grad.data)
        if (!std::isfinite(v))
            throwNumerical("loss: non-finite gradient");
    return out;
}

} // namespace hsplat
