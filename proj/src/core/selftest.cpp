// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "selftest.hpp"

#include "alignment.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "optimizer.hpp"
#include "random_scene.hpp"
#include "scene_bundle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <unistd.h>

namespace hsplat {

namespace {

using Clock = std::chrono::steady_clock;

double
seconds(Clock::time_point since) {
    return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string
fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

Quaternion
randomQuat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

Vec3
randomVec(std::mt19937_64 &rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

double
maxAbsDiff(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

SelftestResult
oracleEquivalence(const SelftestOptions &opt) {
    const int scenes = opt.quick ? 20 : 100;
    RenderOptions ro;
    ro.workers = opt.workers;
    double worst = 0.0;
    std::mt19937_64 rng(1234);
    const auto start = Clock::now();
    for (int s = 0; s < scenes; ++s) {
        RandomSceneSpec spec;
        spec.gaussians = 1 + static_cast<int>(rng() % 500);
        const RandomScene scene = makeRandomScene(1000 + static_cast<std::uint64_t>(s), spec);
        const RenderOutput a = render(scene.cloud, scene.camera, ro);
        const RenderOutput b = renderReference(scene.cloud, scene.camera, ro);
        worst = std::max(worst, maxAbsDiff(a.color, b.color));
    }
    const double t = seconds(start);
    return {"oracle_equivalence", worst < 1e-5 && t < 120.0,
            std::to_string(scenes) + " scenes, max diff " + fmt(worst) + ", " + fmt(t) + " s"};
}

RandomSceneSpec
gradientSceneSpec() {
    RandomSceneSpec spec;
    spec.gaussians     = 20;
    spec.width         = 16;
    spec.height        = 16;
    spec.focal         = 16.0;
    spec.depthMin      = 2.0;
    spec.depthMax      = 3.0;
    spec.scaleMin      = 0.6;
    spec.scaleMax      = 1.5;
    spec.opacityMin    = 0.05;
    spec.opacityMax    = 0.35;
    spec.dcAmplitude   = 0.8;
    spec.restAmplitude = 0.05;
    return spec;
}

SelftestResult
gradientFidelity(const SelftestOptions &opt) {
    const int scenes = opt.quick ? 3 : 10;
    RenderOptions ro;
    ro.workers = opt.workers;
    double worst    = 0.0;
    int rejected    = 0;
    std::uint64_t seed = 5000;
    const auto start   = Clock::now();
    for (int s = 0; s < scenes; ++s) {
        RandomScene scene;
        for (;;) {
            scene = makeRandomScene(seed++, gradientSceneSpec());
            if (finiteDifferenceSafe(scene.cloud, scene.camera, ro, 0.005))
                break;
            ++rejected;
        }
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Image weights(scene.camera.width, scene.camera.height, 3);
        for (double &w : weights.data)
            w = u(rng);
        const GradientCheck g = checkRenderGradients(scene.cloud, scene.camera, ro, weights, 1e-4, 1e-3, 1e-6);
        worst = std::max(worst, g.maxRelError);
    }
    const double t = seconds(start);
    return {"gradient_fidelity", worst < 1e-3 && t < 60.0,
            std::to_string(scenes) + " scenes (" + std::to_string(rejected) +
                " near-threshold draws skipped), max rel error " + fmt(worst) + ", " + fmt(t) + " s"};
}

SelftestResult
covarianceSpectrum(const SelftestOptions &opt) {
    const int draws = opt.quick ? 1000 : 10000;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> logS(std::log(1e-3), std::log(1.0));
    double worst = 0.0;
    for (int i = 0; i < draws; ++i) {
        const Vec3 s(std::exp(logS(rng)), std::exp(logS(rng)), std::exp(logS(rng)));
        const Mat3 cov = buildCovariance(randomQuat(rng), s);
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        Vec3 ev = es.eigenvalues();
        Vec3 want = s.cwiseProduct(s);
        std::sort(ev.data(), ev.data() + 3);
        std::sort(want.data(), want.data() + 3);
        worst = std::max(worst, (ev - want).cwiseAbs().maxCoeff());
    }
    return {"covariance_spectrum", worst < 1e-6, std::to_string(draws) + " draws, max error " + fmt(worst)};
}

GaussianCloud
twoGaussians(bool blueIsHead) {
    // A: red, depth 1; B: blue, depth 2; both alpha' = 0.5 at the center.
    GaussianCloud c;
    c.resize(2);
    const double o = logit(0.5);
    for (int i = 0; i < 2; ++i) {
        c.positions[i]     = Vec3(0, 0, i == 0 ? 1.0 : 2.0);
        c.logScales[i]     = Vec3::Constant(std::log(0.01 * (i + 1)));
        c.opacityLogits[i] = o;
        c.groups[i]        = Group::kBackground;
    }
    c.sh[0].at(0, 0) = 0.5 / kShC0;  // red 1.0
    c.sh[0].at(0, 1) = -0.5 / kShC0; // green 0
    c.sh[0].at(0, 2) = -0.5 / kShC0;
    c.sh[1].at(0, 0) = -0.5 / kShC0;
    c.sh[1].at(0, 1) = -0.5 / kShC0;
    c.sh[1].at(0, 2) = 0.5 / kShC0;
    if (blueIsHead)
        c.groups[1] = Group::kHead;
    return c;
}

SelftestResult
priorityCompositing(const SelftestOptions &opt) {
    CameraRig cam;
    cam.width = cam.height = 1;
    cam.fx = cam.fy = 10.0;
    RenderOptions ro;
    ro.workers = opt.workers;
    const Image a = render(twoGaussians(false), cam, ro).color;
    const Image b = render(twoGaussians(true), cam, ro).color;
    // Colors come out of the SH evaluation, so allow a few ulps.
    auto near = [](const Image &img, double r, double bl) {
        return std::abs(img.at(0, 0, 0) - r) < 1e-12 && std::abs(img.at(0, 0, 1)) < 1e-12 &&
               std::abs(img.at(0, 0, 2) - bl) < 1e-12;
    };
    const bool okA = near(a, 0.5, 0.25);
    const bool okB = near(b, 0.25, 0.5);
    return {"priority_compositing", okA && okB,
            "depth order (" + fmt(a.at(0, 0, 0)) + ", " + fmt(a.at(0, 0, 2)) + "), head first (" +
                fmt(b.at(0, 0, 0)) + ", " + fmt(b.at(0, 0, 2)) + ")"};
}

HeadModel
smallHead() {
    return makeSyntheticHead(3, 162, 5, 6, 8);
}

SelftestResult
headModelFixtures(const SelftestOptions &opt) {
    const HeadModel model = smallHead();
    const HeadParams zero = HeadParams::neutral(model);
    const bool exact      = deformCanonical(model, zero) == model.templateVertices;

    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    HeadParams shaped = zero;
    for (auto &v : shaped.shape)
        v = n(rng);
    const Vertices canon = deformCanonical(model, shaped);
    const double skinErr = (skin(model, canon, shaped).vertices - canon).cwiseAbs().maxCoeff();

    const int draws = opt.quick ? 100 : 1000;
    double linErr   = 0.0;
    for (int i = 0; i < draws; ++i) {
        HeadParams p1 = zero, p2 = zero, sum = zero;
        for (int k = 0; k < p1.shape.size(); ++k) {
            p1.shape[k] = n(rng);
            p2.shape[k] = n(rng);
        }
        for (int k = 0; k < p1.expression.size(); ++k) {
            p1.expression[k] = n(rng);
            p2.expression[k] = n(rng);
        }
        sum.shape      = p1.shape + p2.shape;
        sum.expression = p1.expression + p2.expression;
        const Vertices lhs = deformCanonical(model, sum) - model.templateVertices;
        const Vertices rhs = (deformCanonical(model, p1) - model.templateVertices) +
                             (deformCanonical(model, p2) - model.templateVertices);
        linErr = std::max(linErr, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return {"head_model_fixtures", exact && skinErr < 1e-7 && linErr < 1e-9,
            std::string("zero deformation ") + (exact ? "exact" : "inexact") + ", zero-pose skin " +
                fmt(skinErr) + ", linearity " + fmt(linErr)};
}

SelftestResult
bindingRoundTrip(const SelftestOptions &) {
    const HeadModel model = smallHead();
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n(0.0, 0.3);
    HeadParams p = HeadParams::neutral(model);
    for (auto &v : p.expression)
        v = n(rng);
    for (std::size_t j = 1; j < p.pose.size(); ++j)
        p.pose[j] = Vec3(n(rng), n(rng), n(rng));
    const PosedMesh mesh = poseHead(model, p);
    const BindResult bound = bindToMesh(mesh, 4, 1.0);
    const DrivenAttributes d = drive(bound.binding, mesh);
    double idErr = 0.0;
    for (std::size_t i = 0; i < d.positions.size(); ++i) {
        idErr = std::max(idErr, (d.positions[i] - bound.cloud.positions[i]).cwiseAbs().maxCoeff());
        idErr = std::max(idErr, (quatToRotation(d.rotations[i]) - quatToRotation(bound.cloud.rotations[i]))
                                    .cwiseAbs()
                                    .maxCoeff());
        idErr = std::max(idErr, (d.logScales[i] - bound.cloud.logScales[i]).cwiseAbs().maxCoeff());
    }

    RigidTransform g;
    g.rotation    = quatToRotation(randomQuat(rng));
    g.translation = randomVec(rng, -2, 2);
    Vertices moved = mesh.vertices;
    for (Eigen::Index v = 0; v < moved.rows(); ++v)
        moved.row(v) = g.apply(mesh.vertices.row(v).transpose()).transpose();
    const DrivenAttributes dm = drive(bound.binding, makePosedMesh(moved, mesh.faces));
    double eqErr = 0.0;
    for (std::size_t i = 0; i < d.positions.size(); ++i) {
        eqErr = std::max(eqErr, (dm.positions[i] - g.apply(d.positions[i])).cwiseAbs().maxCoeff());
        eqErr = std::max(eqErr, (quatToRotation(dm.rotations[i]) - g.rotation * quatToRotation(d.rotations[i]))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    return {"binding_roundtrip", idErr < 1e-7 && eqErr < 1e-6,
            "drive(bind) " + fmt(idErr) + ", rigid equivariance " + fmt(eqErr)};
}

RigidTransform
randomRigid(std::mt19937_64 &rng) {
    RigidTransform t;
    t.rotation    = quatToRotation(randomQuat(rng));
    t.translation = randomVec(rng, -3, 3);
    return t;
}

SelftestResult
alignmentResidual(const SelftestOptions &opt) {
    const int problems = opt.quick ? 100 : 1000;
    std::mt19937_64 rng(51);
    double worst = 0.0;
    for (int i = 0; i < problems; ++i) {
        const CameraPair pair{randomRigid(rng), randomRigid(rng)};
        const Mat3 r    = quatToRotation(randomQuat(rng));
        const Vec3 t    = randomVec(rng, -1, 1);
        const Vec3 root = randomVec(rng, -0.5, 0.5);
        const RigidTransform tc = solveAlignment(pair, r, t, root);
        for (int k = 0; k < 4; ++k) {
            const Vec3 x    = randomVec(rng, -1, 1);
            const Vec3 head = r * (x - root) + root + t;
            const Vec3 lhs  = pair.headCamera.apply(head);
            const Vec3 rhs  = pair.backgroundCamera.apply(tc.apply(x));
            worst           = std::max(worst, (lhs - rhs).norm());
        }
    }
    return {"alignment_residual", worst < 1e-9, std::to_string(problems) + " problems, max residual " + fmt(worst)};
}

SelftestResult
fileRoundTrips(const SelftestOptions &) {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() / ("headsplat-selftest-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    bool splatOk = false, assetOk = false;
    try {
        RandomSceneSpec spec;
        spec.gaussians = 300;
        GaussianCloud cloud = makeRandomScene(61, spec).cloud;
        // Splat files store float32; quantize first so the round trip can be exact.
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
            for (int a = 0; a < 3; ++a) {
                cloud.positions[i][a] = q(cloud.positions[i][a]);
                cloud.logScales[i][a] = q(cloud.logScales[i][a]);
            }
            auto &r = cloud.rotations[i];
            r       = {q(r.w), q(r.x), q(r.y), q(r.z)};
            cloud.opacityLogits[i] = q(cloud.opacityLogits[i]);
            for (double &v : cloud.sh[i].values)
                v = q(v);
            cloud.groups[i] = Group::kBackground;
        }
        saveSplatFile(cloud, dir / "a.ply");
        const GaussianCloud back = loadSplatFile(dir / "a.ply");
        saveSplatFile(back, dir / "b.ply");
        splatOk = back == cloud && readFileBytes(dir / "a.ply") == readFileBytes(dir / "b.ply");

        const HeadModel model = smallHead();
        saveHeadAsset(model, dir / "a.hsa");
        const HeadModel loaded = loadHeadAsset(dir / "a.hsa");
        saveHeadAsset(loaded, dir / "b.hsa");
        assetOk = loaded.templateVertices == model.templateVertices &&
                  loaded.shapeBasis == model.shapeBasis && loaded.poseBasis == model.poseBasis &&
                  loaded.expressionBasis == model.expressionBasis &&
                  loaded.jointRegressor == model.jointRegressor &&
                  loaded.skinningWeights == model.skinningWeights && loaded.parents == model.parents &&
                  *loaded.faces == *model.faces &&
                  readFileBytes(dir / "a.hsa") == readFileBytes(dir / "b.hsa");
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
    fs::remove_all(dir);
    return {"file_roundtrips", splatOk && assetOk,
            std::string("splat ") + (splatOk ? "exact" : "MISMATCH") + ", head asset " +
                (assetOk ? "exact" : "MISMATCH")};
}

SelftestResult
alignmentCoherence(const SelftestOptions &opt) {
    const SceneBundle scene = makeFixtureScene();
    const HeadModel &model  = *scene.model;
    HeadParams p            = scene.params;
    p.globalRotation        = Mat3::Identity();
    p.globalTranslation     = Vec3::Zero();
    const GaussianCloud head = drivenHead(model, scene.binding, scene.head, p);
    const Vec3 root = regressJoints(model, p.shape).row(model.rootJoint).transpose();

    const Mat3 r  = axisAngleToRotation(Vec3(0.1, -0.3, 0.05));
    const Vec3 t  = Vec3(0.02, -0.01, 0.03);
    const Vec3 tp = rootAdjustedTranslation(r, t, root);
    Vec3 center   = Vec3::Zero();
    for (const Vec3 &x : head.positions)
        center += r * x + tp;
    center /= static_cast<double>(head.size());

    const CameraRig &base = scene.camera("cam0");
    const CameraRig view  = CameraRig::lookAt(base.width, base.height, base.fx,
                                              center + Vec3(0.1, 0.05, 0.6), center);
    std::mt19937_64 rng(71);
    const CameraPair pair{view.worldToCamera, randomRigid(rng)};
    const RigidTransform tc = solveAlignment(pair, r, t, root);

    CameraRig cam1 = view, cam2 = view;
    cam1.worldToCamera = pair.headCamera;
    cam2.worldToCamera = pair.backgroundCamera;
    RenderOptions ro;
    ro.workers = opt.workers;
    const GaussianCloud empty;
    const RenderOutput a =
        render(mergeScenes(head, empty, RigidTransform{r, tp}), cam1, ro);
    const RenderOutput b = render(mergeScenes(head, empty, tc), cam2, ro);
    double covered = 0.0;
    for (double v : a.alpha.data)
        covered += v > 0.5 ? 1.0 : 0.0;
    const double diff = maxAbsDiff(a.color, b.color);
    return {"alignment_coherence", diff < 1e-5 && covered > 0.0,
            "pixel diff " + fmt(diff) + ", " + std::to_string(static_cast<int>(covered)) + " head pixels"};
}

SelftestResult
performance(const SelftestOptions &opt) {
    RandomSceneSpec spec;
    spec.gaussians = opt.quick ? 10000 : 50000;
    spec.width = spec.height = opt.quick ? 256 : 512;
    spec.focal               = spec.width * 0.9;
    spec.scaleMin            = 0.004;
    spec.scaleMax            = 0.03;
    spec.spread              = 0.9;
    const RandomScene scene  = makeRandomScene(81, spec);
    RenderOptions ro;
    ro.workers = opt.workers;

    render(scene.cloud, scene.camera, ro); // warm-up
    const int runs = 3;
    double tiled   = 1e30;
    for (int i = 0; i < runs; ++i) {
        const auto s = Clock::now();
        render(scene.cloud, scene.camera, ro);
        tiled = std::min(tiled, seconds(s));
    }
    const auto s = Clock::now();
    renderReference(scene.cloud, scene.camera, ro);
    const double reference = seconds(s);
    const double speedup   = reference / tiled;
    return {"performance", speedup >= 5.0,
            std::to_string(spec.gaussians) + " Gaussians at " + std::to_string(spec.width) + "x" +
                std::to_string(spec.height) + ": tiled " + fmt(1.0 / tiled) + " FPS, reference " +
                fmt(reference) + " s, speedup " + fmt(speedup) + "x"};
}

} // namespace

bool
finiteDifferenceSafe(const GaussianCloud &cloud, const CameraRig &camera, const RenderOptions &options,
                     double margin) {
    const int w = camera.width, h = camera.height;
    std::vector<double> logT(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
    const Vec3 eye = camera.center();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Mat3 cov = buildCovariance(cloud.rotations[i], cloud.logScales[i].array().exp().matrix());
        const auto sp  = projectGaussian(cloud.positions[i], cov, camera, options);
        if (!sp)
            continue;
        const ShBasis basis = shBasis((cloud.positions[i] - eye).normalized());
        for (int ch = 0; ch < 3; ++ch) {
            double raw = kShColorBias;
            for (int k = 0; k < kShBases; ++k)
                raw += cloud.sh[i].at(k, ch) * basis[static_cast<std::size_t>(k)];
            if (std::abs(raw) < 2e-3)
                return false;
        }
        const double sigma = cloud.opacity(i);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx    = x - sp->mean.x();
                const double dy    = y - sp->mean.y();
                const double power = -0.5 * (sp->conic.x() * dx * dx + 2.0 * sp->conic.y() * dx * dy +
                                             sp->conic.z() * dy * dy);
                const double alpha = sigma * std::exp(power);
                if (std::abs(alpha - options.alphaCull) < margin * options.alphaCull ||
                    std::abs(alpha - options.alphaMax) < margin * options.alphaMax)
                    return false;
                if (alpha >= options.alphaCull)
                    logT[static_cast<std::size_t>(y * w + x)] +=
                        std::log1p(-std::min(options.alphaMax, alpha));
            }
        }
    }
    const double limit = std::log(2.0 * options.transmittanceStop);
    return std::all_of(logT.begin(), logT.end(), [&](double v) { return v > limit; });
}

GradientCheck
checkRenderGradients(const GaussianCloud &cloud, const CameraRig &camera, const RenderOptions &options,
                     const Image &weights, double hSh, double hLogit, double floor) {
    auto loss = [&](const GaussianCloud &c) {
        const RenderOutput out = render(c, camera, options);
        double sum             = 0.0;
        for (std::size_t i = 0; i < out.color.data.size(); ++i)
            sum += weights.data[i] * out.color.data[i];
        return sum;
    };
    ForwardState state;
    render(cloud, camera, options, &state);
    const AppearanceGradients grads = renderBackward(state, weights);

    GradientCheck result;
    GaussianCloud probe = cloud;
    auto compare        = [&](double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        result.maxRelError = std::max(result.maxRelError, std::abs(analytic - numeric) / denom);
        ++result.checked;
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (std::size_t k = 0; k < kShCoefficients; ++k) {
            double &v      = probe.sh[i].values[k];
            const double o = v;
            v              = o + hSh;
            const double up = loss(probe);
            v               = o - hSh;
            const double down = loss(probe);
            v                 = o;
            compare(grads.sh[i].values[k], (up - down) / (2.0 * hSh));
        }
        double &v       = probe.opacityLogits[i];
        const double o  = v;
        v               = o + hLogit;
        const double up = loss(probe);
        v               = o - hLogit;
        const double down = loss(probe);
        v                 = o;
        compare(grads.opacityLogits[i], (up - down) / (2.0 * hLogit));
    }
    return result;
}

std::vector<SelftestResult>
runSelftest(const SelftestOptions &options, const std::function<void(const SelftestResult &)> &onResult) {
    using Check = SelftestResult (*)(const SelftestOptions &);
    const std::pair<const char *, Check> checks[] = {
        {"oracle_equivalence", oracleEquivalence},   {"gradient_fidelity", gradientFidelity},
        {"covariance_spectrum", covarianceSpectrum}, {"priority_compositing", priorityCompositing},
        {"head_model_fixtures", headModelFixtures},  {"binding_roundtrip", bindingRoundTrip},
        {"alignment_residual", alignmentResidual},   {"alignment_coherence", alignmentCoherence},
        {"file_roundtrips", fileRoundTrips},         {"performance", performance},
    };
    std::vector<SelftestResult> results;
    for (const auto &[name, check] : checks) {
        SelftestResult r;
        try {
            r = check(options);
        } catch (const std::exception &e) {
            r = {name, false, std::string("threw: ") + e.what()};
        }
        if (onResult)
            onResult(r);
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace hsplat
