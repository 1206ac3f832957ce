// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Built-in property checks: renderer vs brute-force oracle, analytic vs
// finite-difference gradients, and a handful of closed-form identities.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"
#include "rasterizer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hsplat {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelftestOptions {
    bool quick = false; // fewer scenes and a smaller benchmark
    int workers = 0;
};

std::vector<SelftestResult> runSelftest(const SelftestOptions &options,
                                        const std::function<void(const SelftestResult &)> &onResult = {});

/// Max relative error between analytic and central-difference gradients of
/// L = sum(weights * color). Relative error uses max(|a|, |f|, floor).
struct GradientCheck {
    double maxRelError = 0.0;
    std::size_t checked = 0;
};
GradientCheck checkRenderGradients(const GaussianCloud &cloud, const CameraRig &camera,
                                   const RenderOptions &options, const Image &weights,
                                   double hSh, double hLogit, double floor);

/// True when no pixel/Gaussian pair sits within `margin` (relative) of the
/// alpha cutoff or the alpha clamp, and no pixel can reach the
/// transmittance stop. Finite differences are only meaningful then.
bool finiteDifferenceSafe(const GaussianCloud &cloud, const CameraRig &camera,
                          const RenderOptions &options, double margin);

} // namespace hsplat
