// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "loss.hpp"

#include <cmath>
#include <random>

namespace hsplat::testing {

Image
silhouette(const GaussianCloud &cloud, const CameraRig &camera, double threshold) {
    const RenderOutput out = render(cloud, camera);
    Image mask(out.alpha.width, out.alpha.height, 1);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = out.alpha.data[i] >= threshold ? 1.0 : 0.0;
    return mask;
}

std::vector<std::uint8_t>
trainableOracle(const GaussianCloud &headWorld, const GuidanceSet &guidance, double rho) {
    std::vector<std::uint8_t> out(headWorld.size(), 0);
    for (std::size_t i = 0; i < headWorld.size(); ++i) {
        int frustum = 0, hits = 0;
        for (const GuidanceRecord &g : guidance) {
            const CameraRig &c = g.camera;
            const Vec3 p       = c.worldToCamera.rotation * headWorld.positions[i] + c.worldToCamera.translation;
            if (p.z() <= c.nearPlane || p.z() >= c.farPlane)
                continue;
            const long x = std::lround(std::floor(c.fx * p.x() / p.z() + c.cx + 0.5));
            const long y = std::lround(std::floor(c.fy * p.y() / p.z() + c.cy + 0.5));
            if (x < 0 || y < 0 || x >= c.width || y >= c.height)
                continue;
            ++frustum;
            hits += g.mask.at(static_cast<int>(x), static_cast<int>(y)) > 0.0 ? 1 : 0;
        }
        out[i] = frustum > 0 && hits >= rho * frustum;
    }
    return out;
}

ConvergenceFixture
makeConvergenceFixture(int iterations) {
    ConvergenceFixture f;
    f.scene = makeFixtureScene();
    f.truth = f.scene.head;
    const GaussianCloud world = drivenHead(*f.scene.model, f.scene.binding, f.truth, f.scene.params);

    for (const auto &[name, cam] : f.scene.cameras) {
        GuidanceRecord g;
        g.id                     = name;
        g.camera                 = cam;
        g.camera.worldToCamera   = rigidCompose(cam.worldToCamera, f.scene.headTransform);
        g.params                 = f.scene.params;
        const RenderOutput out   = render(world, g.camera);
        g.image                  = out.color;
        g.mask                   = Image(cam.width, cam.height, 1);
        const int cut            = static_cast<int>(0.6 * cam.width);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cut; ++x)
                g.mask.at(x, y) = out.alpha.at(x, y) >= 0.5 ? 1.0 : 0.0;
        f.guidance.push_back(std::move(g));
    }

    f.config.iterations  = iterations;
    f.config.lrShDc      = 0.05;
    f.config.lrReduction = 1.0;
    f.config.seed        = 1;

    f.expectedTrainable = trainableOracle(world, f.guidance, f.config.rho);
    f.perturbed         = f.truth;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (std::size_t i = 0; i < f.perturbed.size(); ++i) {
        if (!f.expectedTrainable[i])
            continue;
        for (int c = 0; c < 3; ++c)
            f.perturbed.sh[i].at(0, c) += noise(rng);
    }
    return f;
}

double
meanMaskedL1(const ConvergenceFixture &f, const GaussianCloud &head) {
    const GaussianCloud world = drivenHead(*f.scene.model, f.scene.binding, head, f.scene.params);
    double sum                = 0.0;
    for (const GuidanceRecord &g : f.guidance)
        sum += maskedL1(render(world, g.camera).color, g.image, g.mask);
    return sum / static_cast<double>(f.guidance.size());
}

ClusterFixture
makeClusterFixture() {
    ClusterFixture f;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);

    auto add = [&](const Vec3 &p, double scale, double opacity, bool person) {
        const std::size_t i = f.cloud.size();
        f.cloud.resize(i + 1);
        f.cloud.positions[i]     = p;
        f.cloud.rotations[i]     = Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
        f.cloud.logScales[i]     = Vec3::Constant(std::log(scale));
        f.cloud.opacityLogits[i] = logit(opacity);
        for (int c = 0; c < 3; ++c)
            f.cloud.sh[i].at(0, c) = 0.5 * u(rng);
        f.cluster.push_back(person ? 1 : 0);
    };

    // Background shell, then the person cluster.
    for (int i = 0; i < 600; ++i) {
        Vec3 d(n(rng), n(rng), n(rng));
        d.normalize();
        add(d * (6.0 + 0.5 * (u(rng) + 1.0)), 0.15, 0.9, false);
    }
    for (int i = 0; i < 40; ++i) {
        Vec3 p;
        do {
            p = Vec3(u(rng), u(rng), u(rng)) * 0.3;
        } while (p.norm() > 0.3);
        add(p, 0.02, 0.9, true);
    }

    GaussianCloud person;
    for (std::size_t i = 0; i < f.cloud.size(); ++i)
        if (f.cluster[i])
            person.pushFrom(f.cloud, i);

    for (int v = 0; v < 10; ++v) {
        const double a = 2.0 * M_PI * v / 10.0;
        const Vec3 eye(3.0 * std::sin(a), 0.3, 3.0 * std::cos(a));
        LabelView view;
        view.id     = "view" + std::to_string(v);
        view.camera = CameraRig::lookAt(96, 96, 110.0, eye, Vec3::Zero());
        view.mask   = v < 8 ? silhouette(person, view.camera, 0.5) : Image(96, 96, 1, 0.0);
        f.views.push_back(std::move(view));
    }
    return f;
}

std::vector<std::uint8_t>
voteOracle(const GaussianCloud &cloud, const std::vector<LabelView> &views, const MaskVoteConfig &config,
           const RenderOptions &options) {
    std::vector<int> visible(cloud.size(), 0), hits(cloud.size(), 0);
    for (const LabelView &view : views) {
        const CameraRig &c = view.camera;
        const int r        = config.dilationRadius;
        Image mask(c.width, c.height, 1);
        for (int y = 0; y < c.height; ++y)
            for (int x = 0; x < c.width; ++x)
                for (int dy = -r; dy <= r && mask.at(x, y) == 0.0; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sx = x + dx, sy = y + dy;
                        if (sx >= 0 && sy >= 0 && sx < c.width && sy < c.height &&
                            view.mask.at(sx, sy) != 0.0) {
                            mask.at(x, y) = 1.0;
                            break;
                        }
                    }
        const Image depth = render(cloud, c, options).depth;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Vec3 p = c.worldToCamera.rotation * cloud.positions[i] + c.worldToCamera.translation;
            if (p.z() <= c.nearPlane || p.z() >= c.farPlane)
                continue;
            const long x = std::lround(std::floor(c.fx * p.x() / p.z() + c.cx + 0.5));
            const long y = std::lround(std::floor(c.fy * p.y() / p.z() + c.cy + 0.5));
            if (x < 0 || y < 0 || x >= c.width || y >= c.height)
                continue;
            if (p.z() > depth.at(static_cast<int>(x), static_cast<int>(y)) + config.depthTolerance)
                continue;
            ++visible[i];
            hits[i] += mask.at(static_cast<int>(x), static_cast<int>(y)) != 0.0 ? 1 : 0;
        }
    }
    std::vector<std::uint8_t> flags(cloud.size(), 0);
    for (std::size_t i = 0; i < flags.size(); ++i)
        flags[i] = visible[i] > 0 && visible[i] >= config.minViews && hits[i] >= config.tau * visible[i];
    return flags;
}

} // namespace hsplat::testing
