// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Geometric primitives shared by the whole engine: quaternions, rigid
// transforms and degree-3 real spherical harmonics.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstddef>

namespace hsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Quaternion stored as (w, x, y, z). Values need not be unit length;
/// conversions normalize, and the zero quaternion is rejected.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion
    identity() {
        return {};
    }

    double norm() const;
    Quaternion normalized() const;

    /// Hamilton product; (a * b) rotates by b first, then a.
    Quaternion operator*(const Quaternion &rhs) const;

    bool
    operator==(const Quaternion &o) const {
        return w == o.w && x == o.x && y == o.y && z == o.z;
    }
};

Mat3 quatToRotation(const Quaternion &q);

/// Unit quaternion with non-negative w for a proper rotation matrix.
Quaternion rotationToQuat(const Mat3 &rotation);

/// Rodrigues formula; a zero vector yields the identity.
Mat3 axisAngleToRotation(const Vec3 &axisAngle);

/// x -> rotation * x + translation. The rotation must be proper and
/// orthonormal; see `isValidRotation`.
struct RigidTransform {
    Mat3 rotation    = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform
    identity() {
        return {};
    }

    Vec3
    apply(const Vec3 &x) const {
        return rotation * x + translation;
    }

    /// Homogeneous 4x4 matrix.
    Mat4 matrix() const;

    /// Validates orthonormality (1e-6) and the affine last row.
    static RigidTransform fromMatrix(const Mat4 &m);
};

bool isValidRotation(const Mat3 &r, double tol = 1e-6);

Vec3 rigidApply(const RigidTransform &t, const Vec3 &x);
/// (a ∘ b)(x) = a(b(x))
RigidTransform rigidCompose(const RigidTransform &a, const RigidTransform &b);
RigidTransform rigidInverse(const RigidTransform &t);

// ---------------------------------------------------------------------------
// Spherical harmonics

inline constexpr int kShBases        = 16;
inline constexpr int kShCoefficients = kShBases * 3;

/// Degree-3 real SH, band-major: coeffs[basis * 3 + channel], basis 0 is DC.
struct ShCoefficients {
    std::array<double, kShCoefficients> values{};

    double &
    at(int basis, int channel) {
        return values[static_cast<std::size_t>(basis * 3 + channel)];
    }
    double
    at(int basis, int channel) const {
        return values[static_cast<std::size_t>(basis * 3 + channel)];
    }

    bool
    operator==(const ShCoefficients &o) const {
        return values == o.values;
    }
};

inline constexpr double kShC0        = 0.28209479177387814;
inline constexpr double kShColorBias = 0.5;

using ShBasis = std::array<double, kShBases>;

/// Evaluates the 16 basis functions at a unit direction (no validation).
ShBasis shBasis(const Vec3 &dir);

/// RGB = max(0, sum_k c_k Y_k(dir) + 0.5). `dir` must be unit within 1e-6.
Vec3 evalSh(const ShCoefficients &coeffs, const Vec3 &dir);

/// Same as `evalSh` with precomputed basis; also reports which channels
/// were clamped to zero.
Vec3 evalShWithBasis(const ShCoefficients &coeffs, const ShBasis &basis,
                     std::array<bool, 3> *clamped = nullptr);

inline double
logistic(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

inline double
logit(double p) {
    return std::log(p / (1.0 - p));
}

} // namespace hsplat
