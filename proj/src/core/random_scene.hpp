// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random Gaussian scenes in front of a fixed camera, for oracle
// comparisons and benchmarks.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"

#include <cstdint>

namespace hsplat {

struct RandomSceneSpec {
    int gaussians       = 100;
    int width           = 64;
    int height          = 64;
    double focal        = 60.0;
    double depthMin     = 1.0;
    double depthMax     = 4.0;
    double scaleMin     = 0.01; // meters
    double scaleMax     = 0.15;
    double opacityMin   = 0.05;
    double opacityMax   = 0.95;
    double dcAmplitude  = 1.0;
    double restAmplitude = 0.2;
    double headFraction = 0.3;
    double spread       = 0.6; // fraction of the visible half-extent
};

struct RandomScene {
    GaussianCloud cloud;
    CameraRig camera;
};

/// Camera at the origin looking down +z; Gaussians scattered in the view
/// volume with random orientation, scale, opacity and SH.
RandomScene makeRandomScene(std::uint64_t seed, const RandomSceneSpec &spec = {});

} // namespace hsplat
