// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "math.hpp"
#include "test_support.hpp"

#include <random>

using namespace hsplat;
using hsplat::testing::throwsKind;

namespace {

Quaternion
randomQuat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n;
    return {n(rng), n(rng), n(rng), n(rng)};
}

RigidTransform
randomRigid(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    return {quatToRotation(randomQuat(rng)), Vec3(u(rng), u(rng), u(rng))};
}

ShCoefficients
randomSh(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 0.5);
    ShCoefficients c;
    for (double &v : c.values)
        v = n(rng);
    return c;
}

Vec3
randomDir(std::mt19937_64 &rng) {
    std::normal_distribution<double> n;
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

} // namespace

TEST(Quaternion, IdentityMapsToIdentity) {
    EXPECT_TRUE(quatToRotation({1, 0, 0, 0}).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Quaternion, QuarterTurnAboutZ) {
    const double h = std::sqrt(0.5);
    const Mat3 r   = quatToRotation({h, 0, 0, h});
    EXPECT_LT((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(Quaternion, NormInvariance) {
    EXPECT_TRUE(quatToRotation({2, 0, 0, 0}).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Quaternion, ZeroRejected) {
    EXPECT_TRUE(throwsKind([] { quatToRotation({0, 0, 0, 0}); }, ErrorKind::kInvalidInput));
}

TEST(Quaternion, RotationsAreOrthonormal) {
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Mat3 r = quatToRotation(randomQuat(rng));
        worst        = std::max(worst, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
        ASSERT_GT(r.determinant(), 0.0);
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Quaternion, RotationRoundTrip) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = quatToRotation(randomQuat(rng));
        EXPECT_LT((quatToRotation(rotationToQuat(r)) - r).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Quaternion, HamiltonProductComposes) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const Quaternion a = randomQuat(rng).normalized(), b = randomQuat(rng).normalized();
        EXPECT_LT((quatToRotation(a * b) - quatToRotation(a) * quatToRotation(b)).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(AxisAngle, ZeroIsIdentityAndQuarterTurn) {
    EXPECT_TRUE(axisAngleToRotation(Vec3::Zero()).isApprox(Mat3::Identity()));
    const Mat3 r = axisAngleToRotation(Vec3(0, 0, M_PI / 2));
    EXPECT_LT((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(EvalSh, DcOnly) {
    ShCoefficients c;
    for (int ch = 0; ch < 3; ++ch)
        c.at(0, ch) = 0.7;
    const Vec3 rgb = evalSh(c, Vec3(0, 0, 1));
    EXPECT_NEAR(kShC0, 0.2821, 1e-4);
    for (int ch = 0; ch < 3; ++ch)
        EXPECT_NEAR(rgb[ch], kShC0 * 0.7 + 0.5, 1e-12);
}

TEST(EvalSh, ZeroCoefficientsGiveOffset) {
    const Vec3 rgb = evalSh(ShCoefficients{}, Vec3(1, 0, 0));
    EXPECT_EQ(rgb, Vec3(0.5, 0.5, 0.5));
}

TEST(EvalSh, DcIsotropy) {
    std::mt19937_64 rng(4);
    ShCoefficients c;
    for (int ch = 0; ch < 3; ++ch)
        c.at(0, ch) = 0.3 * (ch + 1);
    for (int i = 0; i < 100; ++i) {
        const Vec3 d = randomDir(rng);
        EXPECT_EQ(evalSh(c, d), evalSh(c, -d));
    }
}

TEST(EvalSh, ClampsAtZero) {
    ShCoefficients c;
    c.at(0, 1) = -10.0;
    EXPECT_EQ(evalSh(c, Vec3(0, 1, 0))[1], 0.0);
}

TEST(EvalSh, NonUnitDirectionRejected) {
    EXPECT_TRUE(throwsKind([] { evalSh(ShCoefficients{}, Vec3(0, 0, 2)); }, ErrorKind::kInvalidInput));
}

TEST(EvalSh, Linearity) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const ShCoefficients c = randomSh(rng), d = randomSh(rng);
        const double a = 0.7, b = -0.4;
        ShCoefficients mix;
        for (int k = 0; k < kShCoefficients; ++k)
            mix.values[k] = a * c.values[k] + b * d.values[k];
        const Vec3 dir = randomDir(rng);
        // Linearity holds before the clamp; compare raw sums via the basis.
        const ShBasis basis = shBasis(dir);
        for (int ch = 0; ch < 3; ++ch) {
            double sc = 0, sd = 0, sm = 0;
            for (int k = 0; k < kShBases; ++k) {
                sc += c.at(k, ch) * basis[k];
                sd += d.at(k, ch) * basis[k];
                sm += mix.at(k, ch) * basis[k];
            }
            EXPECT_NEAR(sm, a * sc + b * sd, 1e-12);
            const double unclamped = sm + kShColorBias;
            EXPECT_NEAR(evalSh(mix, dir)[ch], std::max(0.0, unclamped), 1e-12);
        }
    }
}

TEST(EvalSh, BasisIsOrthonormalOnSphere) {
    // Monte Carlo estimate of the Gram matrix over uniform directions.
    std::mt19937_64 rng(6);
    Eigen::Matrix<double, kShBases, kShBases> gram = Eigen::Matrix<double, kShBases, kShBases>::Zero();
    const int n                                    = 200000;
    for (int i = 0; i < n; ++i) {
        const ShBasis b = shBasis(randomDir(rng));
        Eigen::Map<const Eigen::Matrix<double, kShBases, 1>> v(b.data());
        gram += v * v.transpose();
    }
    gram *= 4.0 * M_PI / n;
    EXPECT_LT((gram - Eigen::Matrix<double, kShBases, kShBases>::Identity()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Rigid, Examples) {
    EXPECT_EQ(rigidApply(RigidTransform::identity(), Vec3(1, 2, 3)), Vec3(1, 2, 3));
    RigidTransform t;
    t.translation = Vec3(0, 0, 5);
    EXPECT_EQ(rigidApply(t, Vec3::Zero()), Vec3(0, 0, 5));
}

TEST(Rigid, GroupLaws) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const RigidTransform a = randomRigid(rng), b = randomRigid(rng);
        const Vec3 x(u(rng), u(rng), u(rng));
        EXPECT_LT((rigidApply(rigidCompose(a, b), x) - rigidApply(a, rigidApply(b, x))).norm(), 1e-9);
        EXPECT_LT((rigidApply(rigidCompose(a, rigidInverse(a)), x) - x).norm(), 1e-9);
    }
}

TEST(Rigid, MatrixRoundTripAndValidation) {
    std::mt19937_64 rng(8);
    const RigidTransform a = randomRigid(rng);
    const RigidTransform b = RigidTransform::fromMatrix(a.matrix());
    EXPECT_TRUE(b.rotation.isApprox(a.rotation));
    EXPECT_TRUE(b.translation.isApprox(a.translation));
    Mat4 bad = a.matrix();
    bad(0, 0) *= 2.0;
    EXPECT_TRUE(throwsKind([&] { RigidTransform::fromMatrix(bad); }, ErrorKind::kInvalidInput));
    Mat4 reflect = Mat4::Identity();
    reflect(2, 2) = -1.0;
    EXPECT_TRUE(throwsKind([&] { RigidTransform::fromMatrix(reflect); }, ErrorKind::kInvalidInput));
}
