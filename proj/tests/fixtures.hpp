// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Shared scenes for the unit and acceptance tests.

#pragma once

#include "optimizer.hpp"
#include "scene_bundle.hpp"
#include "scene_tools.hpp"

#include <cstdint>
#include <vector>

namespace hsplat::testing {

/// Guidance rendered from the fixture head, masks limited to the left 60%
/// of each head silhouette, and a head whose DC terms carry N(0, 0.2^2)
/// noise on the Gaussians the masks select.
struct ConvergenceFixture {
    SceneBundle scene;
    GuidanceSet guidance;
    GaussianCloud truth;     // appearance the guidance was rendered with
    GaussianCloud perturbed; // optimizer start
    std::vector<std::uint8_t> expectedTrainable;
    OptimConfig config;
};

ConvergenceFixture makeConvergenceFixture(int iterations = 500);

/// Same selection rule as the optimizer, written out independently: the
/// rounded projected mean must land in the mask in at least rho of the
/// in-frustum views.
std::vector<std::uint8_t> trainableOracle(const GaussianCloud &headWorld, const GuidanceSet &guidance,
                                          double rho);

/// Mean masked L1 of the driven head against each guidance image.
double meanMaskedL1(const ConvergenceFixture &f, const GaussianCloud &head);

/// Sparse person cluster at the origin inside a background shell, ten ring
/// cameras; masks cover the cluster in eight views and are empty in two.
struct ClusterFixture {
    GaussianCloud cloud;
    std::vector<LabelView> views;
    std::vector<std::uint8_t> cluster;
};

ClusterFixture makeClusterFixture();

/// Reproject-and-count voting oracle.
std::vector<std::uint8_t> voteOracle(const GaussianCloud &cloud, const std::vector<LabelView> &views,
                                     const MaskVoteConfig &config, const RenderOptions &options = {});

/// Mask rendered from a cloud: 1 where alpha >= threshold.
Image silhouette(const GaussianCloud &cloud, const CameraRig &camera, double threshold);

} // namespace hsplat::testing
