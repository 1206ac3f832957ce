// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Person labeling by multi-view mask voting, and removal of flagged points.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"
#include "image.hpp"
#include "rasterizer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hsplat {

struct MaskVoteConfig {
    double tau            = 0.6;
    int minViews          = 1;
    double depthTolerance = 0.05; // meters
    int dilationRadius    = 3;    // pixels, square structuring element

    void validate() const;
};

struct LabelView {
    std::string id;
    Image mask; // 1 channel, nonzero = person
    CameraRig camera;
};

/// Binary dilation with a (2r+1) x (2r+1) square.
Image dilateMask(const Image &mask, int radius);

struct VoteCounts {
    std::vector<int> visibleViews; // in frustum and not occluded
    std::vector<int> maskHits;     // of those, inside the dilated mask
};

/// Per-Gaussian counts; exposed so callers can re-threshold without
/// re-rendering.
VoteCounts countVotes(const GaussianCloud &cloud, const std::vector<LabelView> &views,
                      const MaskVoteConfig &config, const RenderOptions &options = {});

std::vector<std::uint8_t> flagsFromVotes(const VoteCounts &votes, const MaskVoteConfig &config);

std::vector<std::uint8_t> labelPersonGaussians(const GaussianCloud &cloud,
                                               const std::vector<LabelView> &views,
                                               const MaskVoteConfig &config,
                                               const RenderOptions &options = {});

/// Keeps unflagged points in their original order.
GaussianCloud removeFlagged(const GaussianCloud &cloud, const std::vector<std::uint8_t> &flags);

struct CoverageRow {
    std::string view;
    double removedFraction = 0.0; // pixels where the flagged points alone reach alpha >= 0.5
};

std::vector<CoverageRow> removalReport(const GaussianCloud &cloud,
                                       const std::vector<std::uint8_t> &flags,
                                       const std::vector<LabelView> &views,
                                       const RenderOptions &options = {});

void writeRemovalReport(const std::vector<CoverageRow> &rows, const std::filesystem::path &path);

/// Directory with cameras.json ({"views": [{id, camera fields}]}) and
/// masks/<id>.png.
std::vector<LabelView> loadLabelViews(const std::filesystem::path &dir);

} // namespace hsplat
