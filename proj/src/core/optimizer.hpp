// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Appearance fitting of head Gaussians to multi-view guidance images.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"
#include "head_model.hpp"
#include "image.hpp"
#include "loss.hpp"
#include "rasterizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hsplat {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double beta1      = 0.9;
    double beta2      = 0.999;
    double eps        = 1e-8;
};

/// One bias-corrected Adam update in place. Throws a numerical error naming
/// `block` if any gradient is non-finite.
void adamStep(std::vector<double> &params, const std::vector<double> &grads, AdamState &state,
              double lr, const std::string &block);

enum class MaskMode { kPerView, kAllHead };

struct OptimConfig {
    double lrShDc          = 0.0025;
    double lrShRest        = 0.000125;
    double lrOpacity       = 0.05;
    double lrReduction     = 10.0;
    double finalLrFraction = 0.1; // cosine decay floor, fraction of the start rate
    int iterations         = 30000;
    LossWeights weights;
    double regLambda     = 1e-3;
    double rho           = 0.5;
    MaskMode maskMode    = MaskMode::kPerView;
    int snapshotInterval = 0; // 0 disables snapshots
    std::uint64_t seed   = 0;
    double adamBeta1     = 0.9;
    double adamBeta2     = 0.999;
    double adamEps       = 1e-8;
    LossHook hook;

    void validate() const;
};

/// base / reduction * (floor + (1 - floor) * 0.5 * (1 + cos(pi * it / iterations))).
double scheduledLr(double base, const OptimConfig &config, int iteration);

struct GuidanceRecord {
    std::string id;
    Image image; // RGB in [0, 1]
    Image mask;  // 1 channel, {0, 1}
    CameraRig camera;
    HeadParams params;
    std::string provenance = "raw"; // raw | refined
};

using GuidanceSet = std::vector<GuidanceRecord>;

/// images/<id>.png, masks/<id>.png, cameras.json, params/<id>.json.
GuidanceSet loadGuidance(const std::filesystem::path &dir, const HeadModel &model);
void saveGuidance(const GuidanceSet &set, const std::filesystem::path &dir);

/// Head Gaussians whose projected mean lands inside the mask in at least
/// `rho` of the views where it is in frustum.
std::vector<std::uint8_t> selectTrainable(const std::vector<Group> &groups,
                                          const std::vector<std::vector<Vec3>> &positionsPerView,
                                          const std::vector<Image> &masks,
                                          const std::vector<CameraRig> &cameras, double rho);

struct LossRecord {
    int iteration = 0;
    std::string view;
    double total = 0.0;
    double l1    = 0.0;
    double ssim  = 0.0;
    double hook  = 0.0;
    double reg   = 0.0;
};

struct OptimResult {
    GaussianCloud cloud;
    std::vector<LossRecord> history;
    std::vector<std::uint8_t> trainable;
};

using SnapshotFn = std::function<void(int iteration, const GaussianCloud &cloud)>;

/// `head` carries the appearance; its geometry is replaced per record by
/// driving `binding` with the record's head parameters. The head is
/// rendered on its own in the guidance cameras' frame.
OptimResult optimizeAppearance(const HeadModel &model, const TriangleBinding &binding,
                               const GaussianCloud &head, const GuidanceSet &guidance,
                               const OptimConfig &config, const RenderOptions &renderOptions,
                               const SnapshotFn &snapshot = {});

/// Head cloud driven into the pose of `params`.
GaussianCloud drivenHead(const HeadModel &model, const TriangleBinding &binding,
                         const GaussianCloud &head, const HeadParams &params);

void writeLossCsv(const std::vector<LossRecord> &history, const std::filesystem::path &path);

} // namespace hsplat
