// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "optimizer.hpp"

#include "error.hpp"
#include "image_io.hpp"
#include "json_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace hsplat {

void
adamStep(std::vector<double> &params, const std::vector<double> &grads, AdamState &state,
         double lr, const std::string &block) {
    HS_CHECK_INPUT(params.size() == grads.size(), "adam: parameter/gradient size mismatch in " + block);
    for (double g : grads)
        if (!std::isfinite(g))
            throwNumerical("adam: non-finite gradient in parameter block '" + block + "'");
    if (state.m.size() != params.size()) {
        HS_CHECK_INPUT(state.step == 0 && state.m.empty(), "adam: state does not match " + block);
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i]     = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i]     = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mHat = state.m[i] / c1;
        const double vHat = state.v[i] / c2;
        params[i] -= lr * mHat / (std::sqrt(vHat) + state.eps);
    }
}

void
OptimConfig::validate() const {
    HS_CHECK_INPUT(lrShDc > 0.0 && lrShRest > 0.0 && lrOpacity > 0.0,
                   "optimizer: learning rates must be positive");
    HS_CHECK_INPUT(lrReduction > 0.0, "optimizer: lr_reduction_factor must be positive");
    HS_CHECK_INPUT(finalLrFraction > 0.0 && finalLrFraction <= 1.0,
                   "optimizer: final_lr_fraction must be in (0, 1]");
    HS_CHECK_INPUT(iterations > 0, "optimizer: iterations must be positive");
    HS_CHECK_INPUT(weights.l1 >= 0.0 && weights.ssim >= 0.0 && weights.hook >= 0.0 && regLambda >= 0.0,
                   "optimizer: loss weights must be >= 0");
    HS_CHECK_INPUT(rho >= 0.0 && rho <= 1.0, "optimizer: rho must be in [0, 1]");
    HS_CHECK_INPUT(snapshotInterval >= 0, "optimizer: snapshot_interval must be >= 0");
    HS_CHECK_INPUT(adamBeta1 >= 0.0 && adamBeta1 < 1.0 && adamBeta2 >= 0.0 && adamBeta2 < 1.0 &&
                       adamEps > 0.0,
                   "optimizer: invalid Adam constants");
}

double
scheduledLr(double base, const OptimConfig &config, int iteration) {
    const double t      = static_cast<double>(iteration) / config.iterations;
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    return base / config.lrReduction *
           (config.finalLrFraction + (1.0 - config.finalLrFraction) * cosine);
}

GuidanceSet
loadGuidance(const std::filesystem::path &dir, const HeadModel &model) {
    const Json cams = readJsonFile(dir / "cameras.json");
    if (!cams.contains("views") || !cams["views"].is_array())
        throwParse((dir / "cameras.json").string() + ": missing 'views' array");
    GuidanceSet set;
    for (const Json &v : cams["views"]) {
        GuidanceRecord r;
        r.id         = v.at("id").get<std::string>();
        r.camera     = cameraFromJson(v);
        r.provenance = v.value("provenance", std::string("raw"));
        if (r.provenance != "raw" && r.provenance != "refined")
            throwParse("guidance view " + r.id + ": provenance must be raw or refined");
        r.image  = loadPng(dir / "images" / (r.id + ".png"), 3);
        r.mask   = loadMask(dir / "masks" / (r.id + ".png"));
        r.params = paramsFromJson(readJsonFile(dir / "params" / (r.id + ".json")), model);
        HS_CHECK_INPUT(r.image.width == r.camera.width && r.image.height == r.camera.height,
                       "guidance view " + r.id + ": image size does not match camera");
        HS_CHECK_INPUT(r.mask.width == r.camera.width && r.mask.height == r.camera.height,
                       "guidance view " + r.id + ": mask size does not match camera");
        set.push_back(std::move(r));
    }
    HS_CHECK_INPUT(!set.empty(), "guidance set has no records");
    return set;
}

void
saveGuidance(const GuidanceSet &set, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    std::filesystem::create_directories(dir / "params");
    Json views = Json::array();
    for (const auto &r : set) {
        Json v          = cameraToJson(r.camera);
        v["id"]         = r.id;
        v["provenance"] = r.provenance;
        views.push_back(v);
        savePng(r.image, dir / "images" / (r.id + ".png"));
        savePng(r.mask, dir / "masks" / (r.id + ".png"));
        writeJsonFile(paramsToJson(r.params), dir / "params" / (r.id + ".json"));
    }
    writeJsonFile(Json{{"views", views}}, dir / "cameras.json");
}

std::vector<std::uint8_t>
selectTrainable(const std::vector<Group> &groups,
                const std::vector<std::vector<Vec3>> &positionsPerView,
                const std::vector<Image> &masks, const std::vector<CameraRig> &cameras,
                double rho) {
    HS_CHECK_INPUT(!cameras.empty(), "select_trainable: no views");
    HS_CHECK_INPUT(positionsPerView.size() == cameras.size() && masks.size() == cameras.size(),
                   "select_trainable: per-view inputs differ in length");
    const std::size_t n = groups.size();
    std::vector<int> inFrustum(n, 0), inMask(n, 0);
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const CameraRig &cam = cameras[v];
        HS_CHECK_INPUT(positionsPerView[v].size() == n, "select_trainable: position count mismatch");
        HS_CHECK_INPUT(masks[v].width == cam.width && masks[v].height == cam.height,
                       "select_trainable: mask does not match camera");
        for (std::size_t i = 0; i < n; ++i) {
            if (groups[i] != Group::kHead)
                continue;
            const Vec3 t = cam.toCamera(positionsPerView[v][i]);
            if (!(t.z() > cam.nearPlane && t.z() < cam.farPlane))
                continue;
            const Vec2 uv = cam.project(t);
            const double px = std::floor(uv.x() + 0.5), py = std::floor(uv.y() + 0.5);
            if (px < 0 || py < 0 || px >= cam.width || py >= cam.height)
                continue;
            ++inFrustum[i];
            if (masks[v].at(static_cast<int>(px), static_cast<int>(py)) > 0.0)
                ++inMask[i];
        }
    }
    std::vector<std::uint8_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = inFrustum[i] > 0 && inMask[i] >= rho * inFrustum[i];
    return out;
}

GaussianCloud
drivenHead(const HeadModel &model, const TriangleBinding &binding, const GaussianCloud &head,
           const HeadParams &params) {
    GaussianCloud out = head;
    applyDrive(binding, poseHead(model, params), out);
    return out;
}

namespace {

// Flattened trainable parameters in three blocks.
struct Blocks {
    std::vector<std::size_t> index; // trainable Gaussian indices
    std::vector<double> dc, rest, opacity;
};

Blocks
gather(const GaussianCloud &cloud, const std::vector<std::uint8_t> &trainable) {
    Blocks b;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!trainable[i])
            continue;
        b.index.push_back(i);
        for (int k = 0; k < kShCoefficients; ++k)
            (k < 3 ? b.dc : b.rest).push_back(cloud.sh[i].values[static_cast<std::size_t>(k)]);
        b.opacity.push_back(cloud.opacityLogits[i]);
    }
    return b;
}

void
scatter(const Blocks &b, GaussianCloud &cloud) {
    for (std::size_t j = 0; j < b.index.size(); ++j) {
        const std::size_t i = b.index[j];
        for (int k = 0; k < 3; ++k)
            cloud.sh[i].values[static_cast<std::size_t>(k)] = b.dc[j * 3 + static_cast<std::size_t>(k)];
        for (int k = 3; k < kShCoefficients; ++k)
            cloud.sh[i].values[static_cast<std::size_t>(k)] =
                b.rest[j * 45 + static_cast<std::size_t>(k - 3)];
        cloud.opacityLogits[i] = b.opacity[j];
    }
}

void
copyAppearance(const GaussianCloud &from, GaussianCloud &to) {
    to.sh            = from.sh;
    to.opacityLogits = from.opacityLogits;
}

} // namespace

OptimResult
optimizeAppearance(const HeadModel &model, const TriangleBinding &binding,
                   const GaussianCloud &head, const GuidanceSet &guidance,
                   const OptimConfig &config, const RenderOptions &renderOptions,
                   const SnapshotFn &snapshot) {
    config.validate();
    renderOptions.validate();
    HS_CHECK_INPUT(!guidance.empty(), "optimize: guidance set has no records");
    HS_CHECK_INPUT(head.size() == binding.size(), "optimize: head cloud and binding differ in size");

    std::vector<GaussianCloud> posed;
    std::vector<std::vector<Vec3>> positions;
    std::vector<Image> masks;
    std::vector<CameraRig> cameras;
    for (const auto &r : guidance) {
        HS_CHECK_INPUT(r.image.width == r.camera.width && r.image.height == r.camera.height &&
                           r.image.channels == 3,
                       "optimize: record " + r.id + " image does not match its camera");
        HS_CHECK_INPUT(r.mask.width == r.camera.width && r.mask.height == r.camera.height &&
                           r.mask.channels == 1,
                       "optimize: record " + r.id + " mask does not match its camera");
        posed.push_back(drivenHead(model, binding, head, r.params));
        positions.push_back(posed.back().positions);
        masks.push_back(config.maskMode == MaskMode::kAllHead
                            ? Image(r.camera.width, r.camera.height, 1, 1.0)
                            : r.mask);
        cameras.push_back(r.camera);
    }

    OptimResult result;
    result.cloud     = head;
    result.trainable = selectTrainable(head.groups, positions, masks, cameras, config.rho);
    Blocks params    = gather(head, result.trainable);
    if (params.index.empty())
        throwInvalid("optimize: no trainable Gaussians (check masks and cameras)");
    const Blocks initial = params;
    const double regCount =
        static_cast<double>(params.dc.size() + params.rest.size() + params.opacity.size());

    AdamState sDc, sRest, sOpacity;
    for (AdamState *s : {&sDc, &sRest, &sOpacity}) {
        s->beta1 = config.adamBeta1;
        s->beta2 = config.adamBeta2;
        s->eps   = config.adamEps;
    }

    std::mt19937_64 rng(config.seed);
    for (int it = 0; it < config.iterations; ++it) {
        const std::size_t r     = static_cast<std::size_t>(rng() % guidance.size());
        const GuidanceRecord &g = guidance[r];
        GaussianCloud &world    = posed[r];
        copyAppearance(result.cloud, world);

        ForwardState state;
        const RenderOutput rendered = render(world, g.camera, renderOptions, &state);
        const LossValue loss = computeLoss(rendered.color, g.image, g.mask, config.weights, &config.hook);
        const AppearanceGradients grads = renderBackward(state, loss.grad);

        std::vector<double> gDc(params.dc.size()), gRest(params.rest.size()), gOp(params.opacity.size());
        double reg = 0.0;
        const double regScale = config.regLambda / regCount;
        auto anchor = [&](const std::vector<double> &cur, const std::vector<double> &init,
                          std::vector<double> &grad) {
            for (std::size_t k = 0; k < cur.size(); ++k) {
                const double d = cur[k] - init[k];
                reg += regScale * d * d;
                grad[k] += 2.0 * regScale * d;
            }
        };
        for (std::size_t j = 0; j < params.index.size(); ++j) {
            const std::size_t i = params.index[j];
            for (int k = 0; k < 3; ++k)
                gDc[j * 3 + static_cast<std::size_t>(k)] = grads.sh[i].values[static_cast<std::size_t>(k)];
            for (int k = 3; k < kShCoefficients; ++k)
                gRest[j * 45 + static_cast<std::size_t>(k - 3)] =
                    grads.sh[i].values[static_cast<std::size_t>(k)];
            gOp[j] = grads.opacityLogits[i];
        }
        anchor(params.dc, initial.dc, gDc);
        anchor(params.rest, initial.rest, gRest);
        anchor(params.opacity, initial.opacity, gOp);

        adamStep(params.dc, gDc, sDc, scheduledLr(config.lrShDc, config, it), "sh_dc");
        adamStep(params.rest, gRest, sRest, scheduledLr(config.lrShRest, config, it), "sh_rest");
        adamStep(params.opacity, gOp, sOpacity, scheduledLr(config.lrOpacity, config, it), "opacity");
        scatter(params, result.cloud);

        result.history.push_back({it, g.id, loss.total + reg, loss.l1, loss.ssim, loss.hook, reg});
        if (snapshot && config.snapshotInterval > 0 && (it + 1) % config.snapshotInterval == 0)
            snapshot(it + 1, result.cloud);
    }
    return result;
}

void
writeLossCsv(const std::vector<LossRecord> &history, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out)
        throwRuntime("cannot write " + path.string());
    out.precision(17);
    out << "iteration,view,total,l1,ssim,hook,regularization\n";
    for (const auto &h : history)
        out << h.iteration << ',' << h.view << ',' << h.total << ',' << h.l1 << ',' << h.ssim << ','
            << h.hook << ',' << h.reg << '\n';
}

} // namespace hsplat
