// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Columnar Gaussian storage, splat point-file I/O, and triangle binding of
// head Gaussians to a posed mesh.

#pragma once

#include "head_model.hpp"
#include "math.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hsplat {

enum class Group : std::uint8_t { kHead = 0, kBackground = 1 };

const char *groupName(Group g);

/// Structure-of-arrays Gaussian cloud. Scale is exp(logScales), opacity is
/// logistic(opacityLogits).
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Quaternion> rotations;
    std::vector<Vec3> logScales;
    std::vector<double> opacityLogits;
    std::vector<ShCoefficients> sh;
    std::vector<Group> groups;
    std::vector<std::uint8_t> personFlags;

    std::size_t
    size() const {
        return positions.size();
    }
    bool
    empty() const {
        return positions.empty();
    }

    void resize(std::size_t n);
    void reserve(std::size_t n);
    /// Appends point `i` of `other`.
    void pushFrom(const GaussianCloud &other, std::size_t i);

    /// All arrays length N and scales finite and positive.
    void validate() const;

    double
    opacity(std::size_t i) const {
        return logistic(opacityLogits[i]);
    }

    bool operator==(const GaussianCloud &) const = default;
};

/// Per-Gaussian attachment to a host triangle. Local position is expressed
/// in the triangle frame in units of `k`.
struct TriangleBinding {
    std::vector<std::uint32_t> triangles;
    std::vector<Vec3> localPositions;
    std::vector<Quaternion> localRotations;
    std::vector<Vec3> localLogScales;
    double k = 1.0;
    std::size_t faceCount = 0;

    std::size_t
    size() const {
        return triangles.size();
    }
    void validate() const;
};

struct BindResult {
    GaussianCloud cloud;
    TriangleBinding binding;
    int degenerateTriangles = 0;
};

/// One or more Gaussians per triangle. With one per triangle the Gaussian
/// sits at the barycenter; additional Gaussians are spread over the
/// barycenters of the triangle's 4^s sub-triangles.
BindResult bindToMesh(const PosedMesh &mesh, int gaussiansPerTriangle, double k = 1.0);

struct DrivenAttributes {
    std::vector<Vec3> positions;
    std::vector<Quaternion> rotations;
    std::vector<Vec3> logScales;
};

/// mu' = k R' mu + T', r' = R' r, s' = k s for every bound Gaussian.
DrivenAttributes drive(const TriangleBinding &binding, const PosedMesh &mesh);

/// Writes the driven world attributes into `cloud` (appearance untouched).
void applyDrive(const TriangleBinding &binding, const PosedMesh &mesh, GaussianCloud &cloud);

/// Rigidly transforms the head block and appends the background; groups
/// are preserved and the head block comes first.
GaussianCloud mergeScenes(const GaussianCloud &head, const GaussianCloud &background,
                          const RigidTransform &headTransform);

// Splat point files (binary little-endian PLY, 62 float properties).
GaussianCloud loadSplatFile(const std::filesystem::path &path, Group group = Group::kBackground);
void saveSplatFile(const GaussianCloud &cloud, const std::filesystem::path &path);

/// Sidecar label file: one "index,group,person" line per point.
void saveLabels(const GaussianCloud &cloud, const std::filesystem::path &path);
void loadLabels(GaussianCloud &cloud, const std::filesystem::path &path);

/// Binding sidecar (structured text: k, face count, triangle per point).
void saveBinding(const TriangleBinding &binding, const std::filesystem::path &path);
/// `localCloud` carries the local attributes in its position/rotation/scale
/// columns (see `localCloud`).
TriangleBinding loadBinding(const std::filesystem::path &path, const GaussianCloud &localCloud);

/// Cloud whose geometric columns hold the binding's local attributes.
GaussianCloud localCloud(const TriangleBinding &binding, const GaussianCloud &appearance);

} // namespace hsplat
