// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"
#include "random_scene.hpp"
#include "scene_tools.hpp"
#include "test_support.hpp"

#include <random>

using namespace hsplat;
using namespace hsplat::testing;

namespace {

const ClusterFixture &
cluster() {
    static const ClusterFixture f = makeClusterFixture();
    return f;
}

std::size_t
popcount(const std::vector<std::uint8_t> &flags) {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
}

} // namespace

TEST(Dilate, SquareStructuringElement) {
    Image m(9, 9, 1, 0.0);
    m.at(4, 4) = 1.0;
    const Image d = dilateMask(m, 2);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            EXPECT_EQ(d.at(x, y), (std::abs(x - 4) <= 2 && std::abs(y - 4) <= 2) ? 1.0 : 0.0);
    EXPECT_EQ(dilateMask(m, 0).data, m.data);
}

TEST(Label, AllOneMaskFlagsVisibleCloud) {
    RandomSceneSpec spec;
    spec.gaussians      = 60;
    spec.spread         = 0.4;
    const RandomScene s = makeRandomScene(5, spec);
    const LabelView v{"v0", Image(s.camera.width, s.camera.height, 1, 1.0), s.camera};
    MaskVoteConfig cfg;
    cfg.depthTolerance = 1e6; // every point counts as visible
    const auto flags   = labelPersonGaussians(s.cloud, {v}, cfg);
    EXPECT_EQ(popcount(flags), s.cloud.size());
}

TEST(Label, AllZeroMaskFlagsNothingAndRemovalIsIdentity) {
    const ClusterFixture &f = cluster();
    std::vector<LabelView> views = f.views;
    for (auto &v : views)
        std::fill(v.mask.data.begin(), v.mask.data.end(), 0.0);
    const auto flags = labelPersonGaussians(f.cloud, views, MaskVoteConfig{});
    EXPECT_EQ(popcount(flags), 0u);
    EXPECT_EQ(removeFlagged(f.cloud, flags), f.cloud);
}

TEST(Label, ClusterMatchesOracle) {
    const ClusterFixture &f = cluster();
    MaskVoteConfig cfg;
    cfg.tau          = 0.6;
    const auto flags = labelPersonGaussians(f.cloud, f.views, cfg);
    EXPECT_EQ(flags, f.cluster);
    EXPECT_EQ(flags, voteOracle(f.cloud, f.views, cfg));
}

TEST(Label, MonotoneInTauAndDeterministic) {
    const ClusterFixture &f = cluster();
    MaskVoteConfig cfg;
    const VoteCounts votes = countVotes(f.cloud, f.views, cfg);
    std::vector<std::uint8_t> previous(f.cloud.size(), 1);
    for (double tau = 0.1; tau <= 1.0 + 1e-9; tau += 0.1) {
        cfg.tau          = std::min(tau, 1.0);
        const auto flags = flagsFromVotes(votes, cfg);
        for (std::size_t i = 0; i < flags.size(); ++i)
            ASSERT_LE(flags[i], previous[i]) << "tau " << tau;
        previous = flags;
    }
    cfg.tau = 0.6;
    EXPECT_EQ(labelPersonGaussians(f.cloud, f.views, cfg), labelPersonGaussians(f.cloud, f.views, cfg));
}

TEST(Label, ConfigValidation) {
    MaskVoteConfig cfg;
    cfg.tau = 0.0;
    EXPECT_TRUE(throwsKind([&] { cfg.validate(); }, ErrorKind::kInvalidInput));
    cfg     = {};
    cfg.dilationRadius = -1;
    EXPECT_TRUE(throwsKind([&] { cfg.validate(); }, ErrorKind::kInvalidInput));
}

TEST(Remove, NoneAllAndRandomOracle) {
    const GaussianCloud cloud = makeRandomScene(8).cloud;
    EXPECT_EQ(removeFlagged(cloud, std::vector<std::uint8_t>(cloud.size(), 0)), cloud);
    EXPECT_TRUE(removeFlagged(cloud, std::vector<std::uint8_t>(cloud.size(), 1)).empty());

    std::mt19937_64 rng(9);
    std::vector<std::uint8_t> flags(cloud.size());
    for (auto &f : flags)
        f = rng() % 3 == 0;
    const GaussianCloud kept = removeFlagged(cloud, flags);
    ASSERT_EQ(kept.size(), cloud.size() - popcount(flags));
    std::size_t j = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (flags[i])
            continue;
        EXPECT_EQ(kept.positions[j], cloud.positions[i]);
        EXPECT_EQ(kept.rotations[j], cloud.rotations[i]);
        EXPECT_EQ(kept.logScales[j], cloud.logScales[i]);
        EXPECT_EQ(kept.opacityLogits[j], cloud.opacityLogits[i]);
        EXPECT_EQ(kept.sh[j], cloud.sh[i]);
        EXPECT_EQ(kept.groups[j], cloud.groups[i]);
        ++j;
    }
    EXPECT_TRUE(throwsKind([&] { removeFlagged(cloud, {1, 0}); }, ErrorKind::kInvalidInput));
}

TEST(Remove, ReportCoversMaskedViews) {
    const ClusterFixture &f = cluster();
    const auto rows = removalReport(f.cloud, f.cluster, f.views);
    ASSERT_EQ(rows.size(), f.views.size());
    EXPECT_GT(rows.front().removedFraction, 0.0);
    for (const auto &r : rows) {
        EXPECT_GE(r.removedFraction, 0.0);
        EXPECT_LE(r.removedFraction, 1.0);
    }
}
