// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Head-to-background rigid alignment from camera pairs, and a least-squares
// rigid/similarity fit from point correspondences.

#pragma once

#include "math.hpp"

#include <filesystem>
#include <vector>

namespace hsplat {

/// t' = t + (I - R) x_root, so that R x + t' == R (x - x_root) + x_root + t.
Vec3 rootAdjustedTranslation(const Mat3 &rotation, const Vec3 &translation, const Vec3 &rootJoint);

struct CameraPair {
    RigidTransform headCamera;       // world-to-camera of the head's virtual camera
    RigidTransform backgroundCamera; // world-to-camera of the background capture
};

struct AlignmentProblem {
    std::vector<CameraPair> pairs; // at least one
    Mat3 headRotation    = Mat3::Identity();
    Vec3 headTranslation = Vec3::Zero();
    Vec3 rootJoint       = Vec3::Zero();
};

/// Rigid T_c with headCamera(R x + t') == backgroundCamera(T_c x) for all x:
///   R_c = R2^T R1 R,  t_c = R2^T (R1 t' + t1 - t2).
RigidTransform solveAlignment(const CameraPair &pair, const Mat3 &headRotation,
                              const Vec3 &headTranslation, const Vec3 &rootJoint);

/// Solves every pair and requires them to agree within `tolerance`
/// (max abs difference of the 4x4 matrices); otherwise throws.
RigidTransform solveAlignment(const AlignmentProblem &problem, double tolerance = 1e-6);

struct CorrespondenceFit {
    RigidTransform transform;
    double scale = 1.0;
    double rms   = 0.0;
};

/// Minimizes sum |dst - (s R src + t)|^2. With `withScale` false, s = 1.
/// Throws a numerical error on fewer than 3 points or a rank-deficient
/// (collinear) source configuration.
CorrespondenceFit rigidFromCorrespondences(const std::vector<Vec3> &src, const std::vector<Vec3> &dst,
                                           bool withScale = false);

/// Problem file: head_camera / background_camera (16 numbers, row-major) or
/// a "pairs" list of both, head_rotation (quaternion w, x, y, z),
/// head_translation and root_joint.
AlignmentProblem loadAlignmentProblem(const std::filesystem::path &path);
void saveAlignmentProblem(const AlignmentProblem &problem, const std::filesystem::path &path);
void saveAlignmentResult(const RigidTransform &transform, const std::filesystem::path &path);

} // namespace hsplat
