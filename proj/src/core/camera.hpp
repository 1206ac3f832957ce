// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "math.hpp"

namespace hsplat {

/// Pinhole camera, OpenCV axis convention (x right, y down, z forward).
/// Pixel (u, v) has its center at integer coordinates.
struct CameraRig {
    int width  = 0;
    int height = 0;
    double fx  = 0.0;
    double fy  = 0.0;
    double cx  = 0.0;
    double cy  = 0.0;
    RigidTransform worldToCamera;
    double nearPlane = 0.01;
    double farPlane  = 100.0;

    /// Throws on fx/fy <= 0, bad clip range, empty image or a principal
    /// point further than four image extents from the image.
    void validate() const;

    Vec3
    center() const {
        return -(worldToCamera.rotation.transpose() * worldToCamera.translation);
    }

    Vec3
    toCamera(const Vec3 &world) const {
        return worldToCamera.apply(world);
    }

    Vec2
    project(const Vec3 &cameraSpace) const {
        return {fx * cameraSpace.x() / cameraSpace.z() + cx,
                fy * cameraSpace.y() / cameraSpace.z() + cy};
    }

    /// Camera at `eye` looking at `target`, `up` roughly opposite to image y.
    static CameraRig lookAt(int width, int height, double focal, const Vec3 &eye,
                            const Vec3 &target, const Vec3 &up = Vec3(0, 1, 0));
};

} // namespace hsplat
