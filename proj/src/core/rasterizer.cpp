// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "rasterizer.hpp"

#include "error.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hsplat {

void
RenderOptions::validate() const {
    HS_CHECK_INPUT(tileSize > 0 && tileSize <= 256, "render options: tile_size must be in [1, 256]");
    HS_CHECK_INPUT(lowPassDilation >= 0.0, "render options: low_pass_dilation must be >= 0");
    HS_CHECK_INPUT(alphaMax > 0.0 && alphaMax <= 1.0, "render options: alpha_max must be in (0, 1]");
    HS_CHECK_INPUT(alphaCull > 0.0 && alphaCull < alphaMax,
                   "render options: alpha_cull must be in (0, alpha_max)");
    HS_CHECK_INPUT(transmittanceStop >= 0.0 && transmittanceStop < 1.0,
                   "render options: transmittance_stop must be in [0, 1)");
    HS_CHECK_INPUT(frustumMargin > 0.0, "render options: frustum_margin must be positive");
    HS_CHECK_INPUT(background.allFinite(), "render options: background must be finite");
    HS_CHECK_INPUT(workers >= 0, "render options: workers must be >= 0");
}

Mat3
buildCovariance(const Quaternion &q, const Vec3 &scale) {
    if (!(scale.x() > 0.0 && scale.y() > 0.0 && scale.z() > 0.0) || !scale.allFinite())
        throwInvalid("build_covariance: scale must be positive and finite");
    const Mat3 m = quatToRotation(q) * scale.asDiagonal();
    return m * m.transpose();
}

std::optional<Splat2D>
projectGaussian(const Vec3 &mean, const Mat3 &cov3d, const CameraRig &camera,
                const RenderOptions &options) {
    const Vec3 t = camera.toCamera(mean);
    if (!(t.z() > camera.nearPlane) || !(t.z() < camera.farPlane))
        return std::nullopt;

    const Vec2 uv = camera.project(t);
    const double halfW = 0.5 * camera.width;
    const double halfH = 0.5 * camera.height;
    if (std::abs(uv.x() - halfW) > options.frustumMargin * halfW ||
        std::abs(uv.y() - halfH) > options.frustumMargin * halfH)
        return std::nullopt;

    const double invZ = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << camera.fx * invZ, 0.0, -camera.fx * t.x() * invZ * invZ, //
        0.0, camera.fy * invZ, -camera.fy * t.y() * invZ * invZ;
    const Eigen::Matrix<double, 2, 3> jw = jac * camera.worldToCamera.rotation;
    Mat2 cov = jw * cov3d * jw.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += options.lowPassDilation;
    cov(1, 1) += options.lowPassDilation;

    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0) || !std::isfinite(det))
        return std::nullopt;

    Splat2D s;
    s.mean  = uv;
    s.cov   = cov;
    s.conic = Vec3(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    s.depth = t.z();
    return s;
}

bool
blendsBefore(const Splat2D &a, const Splat2D &b) {
    if (a.priority != b.priority)
        return a.priority < b.priority;
    if (a.depth != b.depth)
        return a.depth < b.depth;
    return a.source < b.source;
}

namespace {

// Splat plus the per-splat constant used to skip the exponential when the
// contribution is certainly below alpha_cull.
struct Prepared {
    std::vector<Splat2D> splats;
    std::vector<double> powerFloor;
};

Prepared
prepareSplats(const GaussianCloud &cloud, const CameraRig &camera, const RenderOptions &options) {
    camera.validate();
    options.validate();
    cloud.validate();

    const Vec3 eye = camera.center();
    std::vector<std::optional<Splat2D>> projected(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double opacity = cloud.opacity(i);
        if (!(opacity >= options.alphaCull))
            continue;
        const Vec3 scale = cloud.logScales[i].array().exp().matrix();
        auto s = projectGaussian(cloud.positions[i], buildCovariance(cloud.rotations[i], scale),
                                 camera, options);
        if (!s)
            continue;
        s->opacity  = opacity;
        s->priority = cloud.groups[i];
        s->source   = static_cast<std::uint32_t>(i);

        Vec3 dir          = cloud.positions[i] - eye;
        const double norm = dir.norm();
        dir = norm > 0.0 ? Vec3(dir / norm) : Vec3(0.0, 0.0, 1.0);
        s->basis = shBasis(dir);
        s->color = evalShWithBasis(cloud.sh[i], s->basis, &s->colorClamped);

        const double mid    = 0.5 * (s->cov(0, 0) + s->cov(1, 1));
        const double det    = s->cov(0, 0) * s->cov(1, 1) - s->cov(0, 1) * s->cov(0, 1);
        const double lambda = mid + std::sqrt(std::max(0.0, mid * mid - det));
        s->radius = std::sqrt(2.0 * lambda * std::log(opacity / options.alphaCull)) + 1.0;
        projected[i] = std::move(s);
    }

    Prepared out;
    std::vector<std::uint32_t> order;
    for (std::size_t i = 0; i < projected.size(); ++i)
        if (projected[i])
            order.push_back(static_cast<std::uint32_t>(i));
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return blendsBefore(*projected[a], *projected[b]);
    });
    out.splats.reserve(order.size());
    out.powerFloor.reserve(order.size());
    for (std::uint32_t i : order) {
        out.powerFloor.push_back(std::log(options.alphaCull / projected[i]->opacity) - 1e-6);
        out.splats.push_back(std::move(*projected[i]));
    }
    return out;
}

struct Contribution {
    std::uint32_t splat;
    double alpha;
    double gaussian;
    double transmittance; // before this contribution
    bool saturated;       // alpha clamped to alpha_max
};

// Front-to-back blend of one pixel over an ordered splat list. `visit` is
// called for every contribution; returns the final transmittance.
template <typename Range, typename Visit>
double
blendPixel(const std::vector<Splat2D> &splats, const std::vector<double> &powerFloor,
           const Range &range, double px, double py, const RenderOptions &options, Visit &&visit) {
    double transmittance = 1.0;
    for (std::uint32_t idx : range) {
        const Splat2D &s = splats[idx];
        const double dx  = px - s.mean.x();
        const double dy  = py - s.mean.y();
        double power = -0.5 * (s.conic.x() * dx * dx + s.conic.z() * dy * dy) - s.conic.y() * dx * dy;
        if (power < powerFloor[idx])
            continue;
        power = std::min(power, 0.0);
        const double g   = std::exp(power);
        const double raw = s.opacity * g;
        const double a   = std::min(options.alphaMax, raw);
        if (a < options.alphaCull)
            continue;
        visit(Contribution{idx, a, g, transmittance, raw >= options.alphaMax});
        transmittance *= 1.0 - a;
        if (transmittance < options.transmittanceStop)
            break;
    }
    return transmittance;
}

struct IndexSpan {
    const std::uint32_t *first;
    const std::uint32_t *last;
    const std::uint32_t *begin() const { return first; }
    const std::uint32_t *end() const { return last; }
};

struct IotaSpan {
    std::uint32_t n;
    struct It {
        std::uint32_t v;
        std::uint32_t operator*() const { return v; }
        It &operator++() {
            ++v;
            return *this;
        }
        bool operator!=(const It &o) const { return v != o.v; }
    };
    It begin() const { return {0}; }
    It end() const { return {n}; }
};

RenderOutput
makeOutput(const CameraRig &camera) {
    RenderOutput out;
    out.color = Image(camera.width, camera.height, 3);
    out.alpha = Image(camera.width, camera.height, 1);
    out.depth = Image(camera.width, camera.height, 1);
    out.contributors.assign(out.color.pixelCount(), 0);
    return out;
}


template <typename Range>
void
shadePixel(const std::vector<Splat2D> &splats, const std::vector<double> &powerFloor,
           const Range &range, int x, int y, const RenderOptions &options, RenderOutput &out) {
    Vec3 color          = Vec3::Zero();
    double weightSum    = 0.0;
    double depthSum     = 0.0;
    std::uint32_t count = 0;
    const double finalT = blendPixel(splats, powerFloor, range, x, y, options,
                                     [&](const Contribution &c) {
                                         const Splat2D &s = splats[c.splat];
                                         const double w   = c.alpha * c.transmittance;
                                         color += w * s.color;
                                         weightSum += w;
                                         depthSum += w * s.depth;
                                         ++count;
                                     });
    color += finalT * options.background;
    for (int ch = 0; ch < 3; ++ch)
        out.color.at(x, y, ch) = color[ch];
    out.alpha.at(x, y) = weightSum;
    out.depth.at(x, y) =
        weightSum > 0.0 ? depthSum / weightSum : std::numeric_limits<double>::infinity();
    out.contributors[out.alpha.index(x, y)] = count;
}

template <typename Body>
void
runTiles(int tileCount, int workers, Body &&body) {
    auto loop = [&] {
        tbb::parallel_for(tbb::blocked_range<int>(0, tileCount), [&](const tbb::blocked_range<int> &r) {
            for (int t = r.begin(); t != r.end(); ++t)
                body(t);
        });
    };
    if (workers > 0) {
        tbb::task_arena arena(workers);
        arena.execute(loop);
    } else {
        loop();
    }
}

// Pixel-aligned tile range covered by a splat's cutoff disc, or false if it
// misses the image.
bool
tileRect(const Splat2D &s, const CameraRig &camera, int tileSize, int rect[4]) {
    const double x0 = std::max(0.0, std::ceil(s.mean.x() - s.radius));
    const double x1 = std::min(camera.width - 1.0, std::floor(s.mean.x() + s.radius));
    const double y0 = std::max(0.0, std::ceil(s.mean.y() - s.radius));
    const double y1 = std::min(camera.height - 1.0, std::floor(s.mean.y() + s.radius));
    if (x0 > x1 || y0 > y1)
        return false;
    rect[0] = static_cast<int>(x0) / tileSize;
    rect[1] = static_cast<int>(x1) / tileSize;
    rect[2] = static_cast<int>(y0) / tileSize;
    rect[3] = static_cast<int>(y1) / tileSize;
    return true;
}

void
binTiles(ForwardState &st) {
    const int ts = st.options.tileSize;
    st.tilesX    = (st.camera.width + ts - 1) / ts;
    st.tilesY    = (st.camera.height + ts - 1) / ts;
    const std::size_t tileCount = static_cast<std::size_t>(st.tilesX) * st.tilesY;

    std::vector<std::uint32_t> counts(tileCount + 1, 0);
    std::vector<std::array<int, 4>> rects(st.splats.size());
    std::vector<bool> hits(st.splats.size(), false);
    for (std::size_t i = 0; i < st.splats.size(); ++i) {
        hits[i] = tileRect(st.splats[i], st.camera, ts, rects[i].data());
        if (!hits[i])
            continue;
        const auto &r = rects[i];
        for (int ty = r[2]; ty <= r[3]; ++ty)
            for (int tx = r[0]; tx <= r[1]; ++tx)
                ++counts[static_cast<std::size_t>(ty) * st.tilesX + tx];
    }
    st.tileOffsets.assign(tileCount + 1, 0);
    for (std::size_t t = 0; t < tileCount; ++t)
        st.tileOffsets[t + 1] = st.tileOffsets[t] + counts[t];
    st.tileEntries.assign(st.tileOffsets.back(), 0);
    std::vector<std::uint32_t> cursor(st.tileOffsets.begin(), st.tileOffsets.end() - 1);
    // Splats are visited in blend order, so every tile list is sorted.
    for (std::size_t i = 0; i < st.splats.size(); ++i) {
        if (!hits[i])
            continue;
        const auto &r = rects[i];
        for (int ty = r[2]; ty <= r[3]; ++ty)
            for (int tx = r[0]; tx <= r[1]; ++tx)
                st.tileEntries[cursor[static_cast<std::size_t>(ty) * st.tilesX + tx]++] =
                    static_cast<std::uint32_t>(i);
    }
}

IndexSpan
tileSpan(const ForwardState &st, std::size_t tile) {
    const std::uint32_t *base = st.tileEntries.data();
    return {base + st.tileOffsets[tile], base + st.tileOffsets[tile + 1]};
}

template <typename PixelFn>
void
forEachTilePixel(const ForwardState &st, int tile, PixelFn &&fn) {
    const int ts = st.options.tileSize;
    const int tx = tile % st.tilesX;
    const int ty = tile / st.tilesX;
    const int xEnd = std::min(st.camera.width, (tx + 1) * ts);
    const int yEnd = std::min(st.camera.height, (ty + 1) * ts);
    for (int y = ty * ts; y < yEnd; ++y)
        for (int x = tx * ts; x < xEnd; ++x)
            fn(x, y);
}

} // namespace

std::vector<std::uint32_t>
ForwardState::contributorsAt(int x, int y) const {
    HS_CHECK_INPUT(x >= 0 && y >= 0 && x < camera.width && y < camera.height,
                   "contributors_at: pixel outside the image");
    const int ts           = options.tileSize;
    const std::size_t tile = static_cast<std::size_t>(y / ts) * tilesX + x / ts;
    std::vector<std::uint32_t> out;
    blendPixel(splats, powerFloor, tileSpan(*this, tile), x, y, options,
               [&](const Contribution &c) { out.push_back(splats[c.splat].source); });
    return out;
}

RenderOutput
render(const GaussianCloud &cloud, const CameraRig &camera, const RenderOptions &options,
       ForwardState *state) {
    ForwardState local;
    ForwardState &st = state ? *state : local;
    Prepared prep    = prepareSplats(cloud, camera, options);
    st.camera        = camera;
    st.options       = options;
    st.gaussianCount = cloud.size();
    st.splats        = std::move(prep.splats);
    st.powerFloor    = std::move(prep.powerFloor);
    binTiles(st);

    RenderOutput out = makeOutput(camera);
    runTiles(st.tilesX * st.tilesY, options.workers, [&](int tile) {
        const IndexSpan span = tileSpan(st, static_cast<std::size_t>(tile));
        forEachTilePixel(st, tile, [&](int x, int y) {
            shadePixel(st.splats, st.powerFloor, span, x, y, st.options, out);
        });
    });
    return out;
}

RenderOutput
renderReference(const GaussianCloud &cloud, const CameraRig &camera, const RenderOptions &options) {
    const Prepared prep = prepareSplats(cloud, camera, options);
    const IotaSpan all{static_cast<std::uint32_t>(prep.splats.size())};
    RenderOutput out = makeOutput(camera);

    // Rows are independent; spread them over the same workers as `render`.
    auto rows = [&] {
        tbb::parallel_for(0, camera.height, [&](int y) {
            for (int x = 0; x < camera.width; ++x)
                shadePixel(prep.splats, prep.powerFloor, all, x, y, options, out);
        });
    };
    if (options.workers > 0) {
        tbb::task_arena arena(options.workers);
        arena.execute(rows);
    } else {
        rows();
    }
    return out;
}

AppearanceGradients
renderBackward(const ForwardState &st, const Image &dLdColor) {
    HS_CHECK_INPUT(dLdColor.width == st.camera.width && dLdColor.height == st.camera.height &&
                       dLdColor.channels == 3,
                   "render_backward: gradient image does not match the forward state");
    HS_CHECK_INPUT(st.tilesX * st.tilesY + 1 == static_cast<int>(st.tileOffsets.size()) &&
                       st.powerFloor.size() == st.splats.size(),
                   "render_backward: forward state is incomplete");
    for (double v : dLdColor.data)
        if (!std::isfinite(v))
            throwNumerical("render_backward: non-finite color gradient");

    // Per tile entry: dL/dcolor (3) and dL/dalpha * G (1).
    std::vector<std::array<double, 4>> partial(st.tileEntries.size(), {0.0, 0.0, 0.0, 0.0});
    const int tileCount = st.tilesX * st.tilesY;

    runTiles(tileCount, st.options.workers, [&](int tile) {
        const IndexSpan span      = tileSpan(st, static_cast<std::size_t>(tile));
        const std::uint32_t first = st.tileOffsets[static_cast<std::size_t>(tile)];
        std::vector<Contribution> list;
        std::vector<std::uint32_t> slot;
        forEachTilePixel(st, tile, [&](int x, int y) {
            list.clear();
            slot.clear();
            const std::uint32_t *pos = span.begin();
            blendPixel(st.splats, st.powerFloor, span, x, y, st.options, [&](const Contribution &c) {
                while (*pos != c.splat)
                    ++pos;
                list.push_back(c);
                slot.push_back(first + static_cast<std::uint32_t>(pos - span.begin()));
            });
            const Vec3 g(dLdColor.at(x, y, 0), dLdColor.at(x, y, 1), dLdColor.at(x, y, 2));
            Vec3 behind = st.options.background;
            for (std::size_t k = list.size(); k-- > 0;) {
                const Contribution &c = list[k];
                const Splat2D &s      = st.splats[c.splat];
                auto &acc             = partial[slot[k]];
                const double w        = c.alpha * c.transmittance;
                for (int ch = 0; ch < 3; ++ch)
                    acc[static_cast<std::size_t>(ch)] += g[ch] * w;
                if (!c.saturated) {
                    const double dAlpha = c.transmittance * g.dot(s.color - behind);
                    acc[3] += dAlpha * c.gaussian;
                }
                behind = c.alpha * s.color + (1.0 - c.alpha) * behind;
            }
        });
    });

    AppearanceGradients out;
    out.sh.assign(st.gaussianCount, ShCoefficients{});
    out.opacityLogits.assign(st.gaussianCount, 0.0);
    std::vector<std::array<double, 4>> perSplat(st.splats.size(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t e = 0; e < st.tileEntries.size(); ++e)
        for (std::size_t j = 0; j < 4; ++j)
            perSplat[st.tileEntries[e]][j] += partial[e][j];

    for (std::size_t i = 0; i < st.splats.size(); ++i) {
        const Splat2D &s = st.splats[i];
        HS_CHECK_INPUT(s.source < st.gaussianCount, "render_backward: forward state is inconsistent");
        ShCoefficients &grad = out.sh[s.source];
        for (int ch = 0; ch < 3; ++ch) {
            if (s.colorClamped[static_cast<std::size_t>(ch)])
                continue;
            const double dc = perSplat[i][static_cast<std::size_t>(ch)];
            for (int b = 0; b < kShBases; ++b)
                grad.at(b, ch) = dc * s.basis[static_cast<std::size_t>(b)];
        }
        out.opacityLogits[s.source] = perSplat[i][3] * s.opacity * (1.0 - s.opacity);
    }
    return out;
}

} // namespace hsplat
