// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "camera.hpp"

#include "error.hpp"

#include <cmath>

namespace hsplat {

void
CameraRig::validate() const {
    HS_CHECK_INPUT(width > 0 && height > 0, "camera image size must be positive");
    HS_CHECK_INPUT(fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy),
                   "camera focal lengths must be positive");
    HS_CHECK_INPUT(nearPlane > 0.0 && nearPlane < farPlane, "camera needs 0 < near < far");
    HS_CHECK_INPUT(cx > -4.0 * width && cx < 5.0 * width && cy > -4.0 * height &&
                       cy < 5.0 * height,
                   "camera principal point is outside the allowed margin");
    HS_CHECK_INPUT(isValidRotation(worldToCamera.rotation),
                   "camera rotation is not orthonormal with determinant +1");
    HS_CHECK_INPUT(worldToCamera.translation.allFinite(), "camera translation is not finite");
}

CameraRig
CameraRig::lookAt(int width, int height, double focal, const Vec3 &eye, const Vec3 &target,
                  const Vec3 &up) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right         = forward.cross(up);
    if (right.norm() < 1e-9)
        right = forward.cross(Vec3(0, 0, 1));
    right.normalize();
    const Vec3 down = forward.cross(right);

    CameraRig cam;
    cam.width  = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx          = 0.5 * (width - 1);
    cam.cy          = 0.5 * (height - 1);
    Mat3 r;
    r.row(0)                        = right.transpose();
    r.row(1)                        = down.transpose();
    r.row(2)                        = forward.transpose();
    cam.worldToCamera.rotation    = r;
    cam.worldToCamera.translation = -(r * eye);
    return cam;
}

} // namespace hsplat
