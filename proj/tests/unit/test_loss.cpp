// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "loss.hpp"
#include "test_support.hpp"

#include <fstream>
#include <random>

using namespace hsplat;
using hsplat::testing::TempDir;
using hsplat::testing::throwsKind;

namespace {

Image
randomImage(int w, int h, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Image img(w, h, c);
    for (double &v : img.data)
        v = u(rng);
    return img;
}

} // namespace

TEST(Loss, EqualImagesGiveZeroLossAndGradient) {
    const Image a = randomImage(20, 16, 3, 1);
    const LossValue v = computeLoss(a, a, Image(20, 16, 1, 1.0), LossWeights{});
    EXPECT_EQ(v.l1, 0.0);
    EXPECT_NEAR(v.ssim, 0.0, 1e-12);
    EXPECT_NEAR(v.total, 0.0, 1e-12);
    for (double g : v.grad.data)
        EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Loss, EmptyMaskGivesZero) {
    const Image a = randomImage(20, 16, 3, 2), b = randomImage(20, 16, 3, 3);
    const LossValue v = computeLoss(a, b, Image(20, 16, 1, 0.0), LossWeights{});
    EXPECT_EQ(v.total, 0.0);
    for (double g : v.grad.data)
        EXPECT_EQ(g, 0.0);
}

TEST(Loss, ConstantOffsetL1) {
    const int w = 12, h = 10;
    const Image a(w, h, 3, 0.6), b(w, h, 3, 0.5);
    LossWeights weights;
    weights.l1   = 1.0;
    weights.ssim = 0.0;
    const LossValue v = computeLoss(a, b, Image(w, h, 1, 1.0), weights);
    EXPECT_NEAR(v.total, 0.1, 1e-12);
    const double count = 3.0 * w * h;
    for (double g : v.grad.data)
        EXPECT_DOUBLE_EQ(g, 1.0 / count);
    const LossValue neg = computeLoss(b, a, Image(w, h, 1, 1.0), weights);
    for (double g : neg.grad.data)
        EXPECT_DOUBLE_EQ(g, -1.0 / count);
}

TEST(Loss, MaskRestrictsL1) {
    const int w = 8, h = 8;
    Image a(w, h, 3, 0.5), b(w, h, 3, 0.5), mask(w, h, 1, 0.0);
    for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch)
            a.at(x, 0, ch) = 0.9; // outside the mask
    mask.at(3, 3) = 1.0;
    EXPECT_EQ(maskedL1(a, b, mask), 0.0);
    a.at(3, 3, 1) = 0.8;
    EXPECT_NEAR(maskedL1(a, b, mask), 0.3 / 3.0, 1e-12);
}

TEST(Loss, SsimIdentityAndGradient) {
    const int w = 14, h = 12;
    const Image b = randomImage(w, h, 3, 4);
    Image a       = randomImage(w, h, 3, 5);
    Image mask(w, h, 1, 1.0);
    for (int y = 0; y < h; ++y)
        mask.at(0, y) = 0.0;
    EXPECT_NEAR(maskedSsim(b, b, mask), 1.0, 1e-12);
    EXPECT_EQ(maskedSsim(a, b, Image(w, h, 1, 0.0)), 1.0);

    Image grad;
    maskedSsim(a, b, mask, &grad);
    const double hstep = 1e-6;
    double worst       = 0.0;
    for (std::size_t i = 0; i < a.data.size(); i += 7) {
        const double keep = a.data[i];
        a.data[i]         = keep + hstep;
        const double up   = maskedSsim(a, b, mask);
        a.data[i]         = keep - hstep;
        const double down = maskedSsim(a, b, mask);
        a.data[i]         = keep;
        const double fd   = (up - down) / (2 * hstep);
        worst = std::max(worst, std::abs(fd - grad.data[i]) / std::max({std::abs(fd), std::abs(grad.data[i]), 1e-6}));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Loss, ShapeMismatchRejected) {
    EXPECT_TRUE(throwsKind([] { computeLoss(Image(4, 4, 3), Image(4, 5, 3), Image(4, 4, 1), {}); },
                           ErrorKind::kInvalidInput));
}

TEST(Loss, HookContributesWeightedLossAndGradient) {
    TempDir dir("hook");
    const auto script = dir / "hook.sh";
    std::ofstream(script) << "echo 0.25 > \"$4/loss.txt\"\ncp \"$1\" \"$4/grad.raster\"\n";
    LossHook hook{"sh '" + script.string() + "'", dir / "work"};
    const Image a = randomImage(6, 5, 3, 6), b = randomImage(6, 5, 3, 7);
    const Image mask(6, 5, 1, 1.0);
    LossWeights weights;
    const LossValue base = computeLoss(a, b, mask, weights, &hook);
    weights.hook         = 0.5;
    const LossValue with = computeLoss(a, b, mask, weights, &hook);
    EXPECT_NEAR(with.hook, 0.25, 1e-12);
    EXPECT_NEAR(with.total, base.total + 0.125, 1e-9);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        EXPECT_NEAR(with.grad.data[i], base.grad.data[i] + 0.5 * static_cast<float>(a.data[i]), 1e-6);
}

TEST(Loss, ZeroHookWeightSkipsTheHook) {
    LossHook hook{"false", {}};
    const Image a = randomImage(6, 5, 3, 8), b = randomImage(6, 5, 3, 9);
    const Image mask(6, 5, 1, 1.0);
    const LossValue plain = computeLoss(a, b, mask, LossWeights{});
    const LossValue hooked = computeLoss(a, b, mask, LossWeights{}, &hook);
    EXPECT_EQ(plain.total, hooked.total);
    EXPECT_EQ(plain.grad.data, hooked.grad.data);
    LossWeights on;
    on.hook = 1.0;
    EXPECT_TRUE(throwsKind([&] { computeLoss(a, b, mask, on, &hook); }, ErrorKind::kRuntime));
}
