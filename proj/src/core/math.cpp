// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "math.hpp"

#include "error.hpp"

#include <cmath>

namespace hsplat {

double
Quaternion::norm() const {
    return std::sqrt(w * w + x * x + y * y + z * z);
}

Quaternion
Quaternion::normalized() const {
    const double n = norm();
    if (!(n > 1e-12))
        throwInvalid("quaternion norm is zero or not finite");
    return {w / n, x / n, y / n, z / n};
}

Quaternion
Quaternion::operator*(const Quaternion &b) const {
    const Quaternion &a = *this;
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Mat3
quatToRotation(const Quaternion &q) {
    const Quaternion u = q.normalized();
    const double w = u.w, x = u.x, y = u.y, z = u.z;
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Quaternion
rotationToQuat(const Mat3 &rotation) {
    Eigen::Quaterniond e(rotation);
    e.normalize();
    Quaternion q{e.w(), e.x(), e.y(), e.z()};
    if (q.w < 0.0)
        q = {-q.w, -q.x, -q.y, -q.z};
    return q;
}

Mat3
axisAngleToRotation(const Vec3 &axisAngle) {
    const double angle = axisAngle.norm();
    if (angle < 1e-14)
        return Mat3::Identity();
    return Eigen::AngleAxisd(angle, axisAngle / angle).toRotationMatrix();
}

bool
isValidRotation(const Mat3 &r, double tol) {
    if (!r.allFinite())
        return false;
    const Mat3 e = r.transpose() * r - Mat3::Identity();
    return e.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Mat4
RigidTransform::matrix() const {
    Mat4 m         = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

RigidTransform
RigidTransform::fromMatrix(const Mat4 &m) {
    if (!m.allFinite())
        throwInvalid("transform matrix contains non-finite values");
    const Eigen::RowVector4d last = m.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
        throwInvalid("transform matrix last row must be (0, 0, 0, 1)");
    RigidTransform t;
    t.rotation    = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    if (!isValidRotation(t.rotation))
        throwInvalid("transform rotation block is not orthonormal with determinant +1");
    return t;
}

Vec3
rigidApply(const RigidTransform &t, const Vec3 &x) {
    return t.apply(x);
}

RigidTransform
rigidCompose(const RigidTransform &a, const RigidTransform &b) {
    RigidTransform c;
    c.rotation    = a.rotation * b.rotation;
    c.translation = a.rotation * b.translation + a.translation;
    return c;
}

RigidTransform
rigidInverse(const RigidTransform &t) {
    RigidTransform inv;
    inv.rotation    = t.rotation.transpose();
    inv.translation = -(inv.rotation * t.translation);
    return inv;
}

namespace {

constexpr double kShC1    = 0.4886025119029199;
constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                             -1.0925484305920792, 0.5462742152960396};
constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                             0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                             -0.5900435899266435};

} // namespace

ShBasis
shBasis(const Vec3 &dir) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    ShBasis b;
    b[0]  = kShC0;
    b[1]  = -kShC1 * y;
    b[2]  = kShC1 * z;
    b[3]  = -kShC1 * x;
    b[4]  = kShC2[0] * xy;
    b[5]  = kShC2[1] * yz;
    b[6]  = kShC2[2] * (2.0 * zz - xx - yy);
    b[7]  = kShC2[3] * xz;
    b[8]  = kShC2[4] * (xx - yy);
    b[9]  = kShC3[0] * y * (3.0 * xx - yy);
    b[10] = kShC3[1] * xy * z;
    b[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
    b[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
    b[14] = kShC3[5] * z * (xx - yy);
    b[15] = kShC3[6] * x * (xx - 3.0 * yy);
    return b;
}

Vec3
evalShWithBasis(const ShCoefficients &coeffs, const ShBasis &basis, std::array<bool, 3> *clamped) {
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < kShBases; ++k)
            acc += coeffs.at(k, c) * basis[static_cast<std::size_t>(k)];
        acc += kShColorBias;
        const bool clip = acc < 0.0;
        if (clamped)
            (*clamped)[static_cast<std::size_t>(c)] = clip;
        rgb[c] = clip ? 0.0 : acc;
    }
    return rgb;
}

Vec3
evalSh(const ShCoefficients &coeffs, const Vec3 &dir) {
    if (!dir.allFinite() || std::abs(dir.norm() - 1.0) > 1e-6)
        throwInvalid("SH view direction must be a unit vector");
    return evalShWithBasis(coeffs, shBasis(dir));
}

} // namespace hsplat
