// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Parametric head: blendshape deformation of a template mesh, joint
// regression and linear blend skinning, plus a z-buffered mesh depth
// rasterizer.

#pragma once

#include "camera.hpp"
#include "image.hpp"
#include "math.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace hsplat {

using Face      = std::array<std::uint32_t, 3>;
using FaceList  = std::vector<Face>;
using Vertices  = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using DenseRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable after construction. Bases are stored as (3V x K) with row
/// index `3 * vertex + axis`. The pose-corrective basis has 9 columns per
/// non-root joint, in joint-index order.
struct HeadModel {
    Vertices templateVertices;
    std::shared_ptr<const FaceList> faces;
    DenseRows shapeBasis;
    DenseRows poseBasis;
    DenseRows expressionBasis;
    DenseRows jointRegressor;  // J x V
    DenseRows skinningWeights; // V x J
    std::vector<int> parents;  // root has -1
    int rootJoint = 0;

    int
    vertexCount() const {
        return static_cast<int>(templateVertices.rows());
    }
    int
    jointCount() const {
        return static_cast<int>(parents.size());
    }
    int
    faceCount() const {
        return faces ? static_cast<int>(faces->size()) : 0;
    }
    int
    shapeDims() const {
        return static_cast<int>(shapeBasis.cols());
    }
    int
    expressionDims() const {
        return static_cast<int>(expressionBasis.cols());
    }

    /// Throws an invalid-input error naming the offending field.
    void validate() const;
};

struct HeadParams {
    Eigen::VectorXd shape;
    Eigen::VectorXd expression;
    std::vector<Vec3> pose; // axis-angle per joint
    Mat3 globalRotation    = Mat3::Identity();
    Vec3 globalTranslation = Vec3::Zero();

    /// All-zero parameters sized for `model`.
    static HeadParams neutral(const HeadModel &model);
    void checkAgainst(const HeadModel &model) const;
};

struct PosedMesh {
    Vertices vertices;
    std::shared_ptr<const FaceList> faces;
    std::vector<Mat3> faceFrames;
    std::vector<Vec3> barycenters;
    std::vector<double> faceAreas;

    int
    faceCount() const {
        return faces ? static_cast<int>(faces->size()) : 0;
    }
};

/// Builds per-face frames: column 0 along edge (v1 - v0), column 2 the unit
/// normal, column 1 = column 2 x column 0. Degenerate faces get identity.
PosedMesh makePosedMesh(Vertices vertices, std::shared_ptr<const FaceList> faces);

/// Flattened (R_j - I) for all non-root joints, 9 values per joint.
Eigen::VectorXd poseFeature(const HeadModel &model, const HeadParams &params);

Vertices deformCanonical(const HeadModel &model, const HeadParams &params);

/// joint_regressor x (template + shape_basis * shape)
Vertices regressJoints(const HeadModel &model, const Eigen::VectorXd &shape);

/// LBS about the regressed joints, then the global rigid about the root joint.
PosedMesh skin(const HeadModel &model, const Vertices &canonical, const HeadParams &params);

/// deformCanonical followed by skin.
PosedMesh poseHead(const HeadModel &model, const HeadParams &params);

/// Z-buffered, perspective-correct camera-space depth; +inf where empty.
/// Triangles with a vertex closer than the near plane are skipped.
Image rasterizeMeshDepth(const PosedMesh &mesh, const CameraRig &camera);

// Asset container I/O (see docs/formats.md).
HeadModel loadHeadAsset(const std::filesystem::path &path);
void saveHeadAsset(const HeadModel &model, const std::filesystem::path &path);

/// Deterministic fixture: an ellipsoid-deformed icosphere (V must be
/// 10 * 4^s + 2) with a binary-tree skeleton rooted at joint 0. All arrays
/// are exactly representable in float32.
HeadModel makeSyntheticHead(std::uint64_t seed, int vertexCount, int jointCount, int shapeDims,
                            int expressionDims);

} // namespace hsplat
