// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "random_scene.hpp"

#include "error.hpp"

#include <cmath>
#include <random>

namespace hsplat {

RandomScene
makeRandomScene(std::uint64_t seed, const RandomSceneSpec &spec) {
    HS_CHECK_INPUT(spec.gaussians >= 0 && spec.width > 0 && spec.height > 0,
                   "random scene: bad dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    RandomScene s;
    s.camera.width  = spec.width;
    s.camera.height = spec.height;
    s.camera.fx = s.camera.fy = spec.focal;
    s.camera.cx = 0.5 * (spec.width - 1);
    s.camera.cy = 0.5 * (spec.height - 1);

    GaussianCloud &c = s.cloud;
    c.reserve(static_cast<std::size_t>(spec.gaussians));
    for (int i = 0; i < spec.gaussians; ++i) {
        const double z  = uniform(spec.depthMin, spec.depthMax);
        const double hx = spec.spread * 0.5 * spec.width * z / spec.focal;
        const double hy = spec.spread * 0.5 * spec.height * z / spec.focal;
        c.positions.emplace_back(uniform(-hx, hx), uniform(-hy, hy), z);
        c.rotations.push_back(
            Quaternion{normal(rng), normal(rng), normal(rng), normal(rng)}.normalized());
        c.logScales.emplace_back(std::log(uniform(spec.scaleMin, spec.scaleMax)),
                                 std::log(uniform(spec.scaleMin, spec.scaleMax)),
                                 std::log(uniform(spec.scaleMin, spec.scaleMax)));
        c.opacityLogits.push_back(logit(uniform(spec.opacityMin, spec.opacityMax)));
        ShCoefficients sh;
        for (int ch = 0; ch < 3; ++ch) {
            sh.at(0, ch) = uniform(-spec.dcAmplitude, spec.dcAmplitude);
            for (int b = 1; b < kShBases; ++b)
                sh.at(b, ch) = uniform(-spec.restAmplitude, spec.restAmplitude);
        }
        c.sh.push_back(sh);
        c.groups.push_back(u01(rng) < spec.headFraction ? Group::kHead : Group::kBackground);
        c.personFlags.push_back(0);
    }
    return s;
}

} // namespace hsplat
