// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Tile-based Gaussian splatting: projection, priority/depth sorted
// front-to-back alpha blending, a brute-force per-pixel reference, and the
// analytic backward pass for appearance (SH + opacity) gradients.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"
#include "image.hpp"
#include "math.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hsplat {

struct RenderOptions {
    int tileSize             = 16;
    double lowPassDilation   = 0.3; // px^2 added to the 2D covariance diagonal
    double alphaMax          = 0.99;
    double alphaCull         = 1.0 / 255.0;
    double transmittanceStop = 1e-4;
    double frustumMargin     = 1.3; // multiple of the image half-extent
    Vec3 background          = Vec3::Zero();
    int workers              = 0; // 0: scheduler default

    void validate() const;
};

/// Sigma = R S S^T R^T with S = diag(scale).
Mat3 buildCovariance(const Quaternion &q, const Vec3 &scale);

struct Splat2D {
    Vec2 mean;
    Mat2 cov;   // dilated
    Vec3 conic; // inverse covariance (a, b, c): [[a, b], [b, c]]
    double depth   = 0.0;
    Vec3 color     = Vec3::Zero();
    double opacity = 0.0;
    Group priority = Group::kBackground;
    std::uint32_t source = 0;
    double radius        = 0.0; // pixels; beyond it alpha < alphaCull
    ShBasis basis{};
    std::array<bool, 3> colorClamped{};
};

/// Projects a world-space Gaussian. Returns nothing when the mean is behind
/// the near plane, beyond the far plane, or outside the margin-expanded
/// image. Only mean, cov, conic and depth are filled.
std::optional<Splat2D> projectGaussian(const Vec3 &mean, const Mat3 &cov3d,
                                       const CameraRig &camera, const RenderOptions &options);

/// Blend order: head before background, then nearer first, then index.
bool blendsBefore(const Splat2D &a, const Splat2D &b);

struct RenderOutput {
    Image color; // RGB
    Image alpha; // sum of blend weights
    Image depth; // alpha-weighted expected depth, +inf where alpha == 0
    std::vector<std::uint32_t> contributors;
};

/// Everything the backward pass needs to replay the forward blend.
struct ForwardState {
    CameraRig camera;
    RenderOptions options;
    std::size_t gaussianCount = 0;
    std::vector<Splat2D> splats;    // blend order
    std::vector<double> powerFloor; // per splat; below it alpha < alphaCull
    int tilesX = 0;
    int tilesY = 0;
    std::vector<std::uint32_t> tileOffsets; // tilesX * tilesY + 1
    std::vector<std::uint32_t> tileEntries; // indices into splats

    /// Source indices that contributed at (x, y), in blend order.
    std::vector<std::uint32_t> contributorsAt(int x, int y) const;
};

RenderOutput render(const GaussianCloud &cloud, const CameraRig &camera,
                    const RenderOptions &options = {}, ForwardState *state = nullptr);

/// No tiling or extent culling: every pixel walks the full sorted list.
RenderOutput renderReference(const GaussianCloud &cloud, const CameraRig &camera,
                             const RenderOptions &options = {});

struct AppearanceGradients {
    std::vector<ShCoefficients> sh; // basis 0 is the DC term
    std::vector<double> opacityLogits;
};

/// Exact gradients of sum(dLdColor * color) with respect to every
/// Gaussian's SH coefficients and opacity logit.
AppearanceGradients renderBackward(const ForwardState &state, const Image &dLdColor);

} // namespace hsplat
