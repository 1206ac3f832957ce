// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// A composed scene on disk: head asset, bound head Gaussians, background
// cloud, head-to-background transform, head parameters and named cameras.

#pragma once

#include "camera.hpp"
#include "gaussian_scene.hpp"
#include "head_model.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace hsplat {

struct SceneBundle {
    std::shared_ptr<const HeadModel> model;
    TriangleBinding binding;
    GaussianCloud head; // appearance; geometry is recomputed by driving
    GaussianCloud background;
    RigidTransform headTransform;
    HeadParams params;
    std::map<std::string, CameraRig> cameras;

    void validate() const;
    const CameraRig &camera(const std::string &name) const;
};

/// Drives the head with `params`, applies the head transform and appends
/// the background.
GaussianCloud composeScene(const SceneBundle &scene, const HeadParams &params);
inline GaussianCloud
composeScene(const SceneBundle &scene) {
    return composeScene(scene, scene.params);
}

/// <dir>/scene.json plus the files it references (relative paths).
SceneBundle loadSceneBundle(const std::filesystem::path &dir);
void saveSceneBundle(const SceneBundle &scene, const std::filesystem::path &dir);

/// Built-in synthetic scene: a bound synthetic head inside a spherical
/// background shell, with cameras cam0..cam3 around the head.
SceneBundle makeFixtureScene();

/// "fixture" selects the built-in scene, anything else is a bundle directory.
SceneBundle resolveScene(const std::string &spec);

} // namespace hsplat
