// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "alignment.hpp"
#include "json_io.hpp"
#include "test_support.hpp"

#include <random>

using namespace hsplat;
using namespace hsplat::testing;

namespace {

struct Rng {
    std::mt19937_64 gen;
    std::normal_distribution<double> n;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double
    operator()() {
        return n(gen);
    }
    Vec3
    vec(double s = 1.0) {
        return s * Vec3((*this)(), (*this)(), (*this)());
    }
    Mat3
    rot() {
        return quatToRotation({(*this)(), (*this)(), (*this)(), (*this)()});
    }
    RigidTransform
    rigid() {
        return {rot(), vec(2.0)};
    }
};

double
substitutionResidual(const AlignmentProblem &p, const CameraPair &pair, const RigidTransform &tc, Rng &rng) {
    const Vec3 tPrime = rootAdjustedTranslation(p.headRotation, p.headTranslation, p.rootJoint);
    double worst      = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 x   = rng.vec(3.0);
        const Vec3 lhs = pair.headCamera.apply(p.headRotation * x + tPrime);
        const Vec3 rhs = pair.backgroundCamera.apply(tc.apply(x));
        worst          = std::max(worst, (lhs - rhs).norm());
    }
    return worst;
}

} // namespace

TEST(RootAdjusted, Examples) {
    Rng rng(1);
    const Vec3 t = rng.vec(), root = rng.vec();
    EXPECT_EQ(rootAdjustedTranslation(Mat3::Identity(), t, root), t);
    EXPECT_EQ(rootAdjustedTranslation(rng.rot(), t, Vec3::Zero()), t);
    for (int k = 0; k < 20; ++k) {
        const Mat3 r = rng.rot();
        const Vec3 tt = rng.vec(), rr = rng.vec();
        const Vec3 tp = rootAdjustedTranslation(r, tt, rr);
        for (int i = 0; i < 100; ++i) {
            const Vec3 x = rng.vec(2.0);
            EXPECT_LT((r * x + tp - (r * (x - rr) + rr + tt)).norm(), 1e-9);
        }
    }
}

TEST(SolveAlignment, DegenerateIsIdentity) {
    Rng rng(2);
    const RigidTransform cam = rng.rigid();
    AlignmentProblem p;
    p.pairs = {{cam, cam}};
    const RigidTransform tc = solveAlignment(p);
    EXPECT_LT((tc.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveAlignment, SameCamerasReduceToHeadRigid) {
    Rng rng(3);
    const RigidTransform cam = rng.rigid();
    AlignmentProblem p;
    p.pairs           = {{cam, cam}};
    p.headRotation    = rng.rot();
    p.headTranslation = rng.vec();
    p.rootJoint       = rng.vec(0.1);
    const RigidTransform tc = solveAlignment(p);
    EXPECT_LT((tc.rotation - p.headRotation).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((tc.translation - rootAdjustedTranslation(p.headRotation, p.headTranslation, p.rootJoint))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
}

TEST(SolveAlignment, SubstitutionResidual) {
    Rng rng(4);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        AlignmentProblem p;
        p.pairs           = {{rng.rigid(), rng.rigid()}};
        p.headRotation    = rng.rot();
        p.headTranslation = rng.vec();
        p.rootJoint       = rng.vec(0.2);
        const RigidTransform tc = solveAlignment(p);
        EXPECT_TRUE(isValidRotation(tc.rotation));
        worst = std::max(worst, substitutionResidual(p, p.pairs[0], tc, rng));
        if (k >= 50)
            break; // the full 10^3-problem sweep lives in the acceptance suite
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(SolveAlignment, ConsistentPairsAgreeInconsistentRejected) {
    Rng rng(5);
    AlignmentProblem p;
    p.headRotation    = rng.rot();
    p.headTranslation = rng.vec();
    const RigidTransform truth = rng.rigid();
    // Background camera_i = head camera_i composed with truth^-1 keeps T_c fixed.
    for (int i = 0; i < 3; ++i) {
        const RigidTransform head = rng.rigid();
        const RigidTransform tPrime{p.headRotation,
                                    rootAdjustedTranslation(p.headRotation, p.headTranslation, p.rootJoint)};
        p.pairs.push_back({head, rigidCompose(rigidCompose(head, tPrime), rigidInverse(truth))});
    }
    const RigidTransform tc = solveAlignment(p, 1e-6);
    EXPECT_LT((tc.matrix() - truth.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    p.pairs.push_back({rng.rigid(), rng.rigid()});
    EXPECT_TRUE(throwsKind([&] { solveAlignment(p, 1e-6); }, ErrorKind::kNumerical));
}

TEST(SolveAlignment, ProblemFileRoundTrip) {
    TempDir dir("align");
    Rng rng(6);
    AlignmentProblem p;
    p.pairs           = {{rng.rigid(), rng.rigid()}, {rng.rigid(), rng.rigid()}};
    p.headRotation    = rng.rot();
    p.headTranslation = rng.vec();
    p.rootJoint       = rng.vec();
    saveAlignmentProblem(p, dir / "p.json");
    const AlignmentProblem q = loadAlignmentProblem(dir / "p.json");
    ASSERT_EQ(q.pairs.size(), 2u);
    EXPECT_LT((q.headRotation - p.headRotation).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((q.pairs[1].backgroundCamera.matrix() - p.pairs[1].backgroundCamera.matrix()).cwiseAbs().maxCoeff(),
              1e-12);
    saveAlignmentResult(solveAlignment(p.pairs[0], p.headRotation, p.headTranslation, p.rootJoint), dir / "t.json");
    EXPECT_NO_THROW(readJsonFile(dir / "t.json"));
}

TEST(Correspondences, IdentityRecoveryAndDegeneracy) {
    Rng rng(7);
    std::vector<Vec3> src;
    for (int i = 0; i < 30; ++i)
        src.push_back(rng.vec());
    const CorrespondenceFit id = rigidFromCorrespondences(src, src);
    EXPECT_LT((id.transform.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(id.rms, 1e-12);

    for (int k = 0; k < 50; ++k) {
        const RigidTransform t = rng.rigid();
        std::vector<Vec3> dst;
        for (const Vec3 &x : src)
            dst.push_back(t.apply(x));
        const CorrespondenceFit fit = rigidFromCorrespondences(src, dst);
        EXPECT_LT((fit.transform.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(fit.rms, 1e-9);

        std::vector<Vec3> scaled;
        for (const Vec3 &x : src)
            scaled.push_back(t.rotation * (1.7 * x) + t.translation);
        const CorrespondenceFit sim = rigidFromCorrespondences(src, scaled, true);
        EXPECT_NEAR(sim.scale, 1.7, 1e-9);
        EXPECT_LE(sim.rms, 1e-9);
    }

    std::vector<Vec3> line;
    for (int i = 0; i < 10; ++i)
        line.push_back(Vec3(1, 2, 3) * i + Vec3(0.5, 0, 0));
    EXPECT_TRUE(throwsKind([&] { rigidFromCorrespondences(line, line); }, ErrorKind::kNumerical));
    EXPECT_TRUE(throwsKind([&] { rigidFromCorrespondences({src[0], src[1]}, {src[0], src[1]}); },
                           ErrorKind::kNumerical));
}
