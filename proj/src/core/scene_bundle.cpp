// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "scene_bundle.hpp"

#include "error.hpp"
#include "json_io.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace hsplat {

void
SceneBundle::validate() const {
    HS_CHECK_INPUT(model != nullptr, "scene: head model missing");
    model->validate();
    binding.validate();
    HS_CHECK_INPUT(binding.faceCount == static_cast<std::size_t>(model->faceCount()),
                   "scene: binding was built for a different face count");
    HS_CHECK_INPUT(head.size() == binding.size(), "scene: head cloud and binding differ in size");
    head.validate();
    background.validate();
    params.checkAgainst(*model);
    for (const auto &[name, cam] : cameras)
        cam.validate();
}

const CameraRig &
SceneBundle::camera(const std::string &name) const {
    const auto it = cameras.find(name);
    if (it == cameras.end()) {
        std::string known;
        for (const auto &[n, c] : cameras)
            known += (known.empty() ? "" : ", ") + n;
        throwInvalid("unknown camera '" + name + "' (available: " + known + ")");
    }
    return it->second;
}

GaussianCloud
composeScene(const SceneBundle &scene, const HeadParams &params) {
    GaussianCloud head = scene.head;
    applyDrive(scene.binding, poseHead(*scene.model, params), head);
    return mergeScenes(head, scene.background, scene.headTransform);
}

SceneBundle
loadSceneBundle(const std::filesystem::path &dir) {
    const Json j = readJsonFile(dir / "scene.json");
    auto path    = [&](const char *key) {
        if (!j.contains(key) || !j[key].is_string())
            throwParse("scene.json: missing '" + std::string(key) + "'");
        return dir / j[key].get<std::string>();
    };
    SceneBundle s;
    s.model = std::make_shared<HeadModel>(loadHeadAsset(path("head_model")));
    const GaussianCloud local = loadSplatFile(path("head"), Group::kHead);
    s.binding = loadBinding(path("binding"), local);
    s.head    = local;
    applyDrive(s.binding, poseHead(*s.model, HeadParams::neutral(*s.model)), s.head);
    if (j.contains("background")) {
        s.background = loadSplatFile(path("background"), Group::kBackground);
        if (j.contains("background_labels"))
            loadLabels(s.background, path("background_labels"));
    }
    if (j.contains("head_transform"))
        s.headTransform = rigidFromJson(j["head_transform"], "scene.json head_transform");
    s.params = j.contains("params") ? paramsFromJson(j["params"], *s.model)
                                    : HeadParams::neutral(*s.model);
    if (j.contains("cameras")) {
        if (!j["cameras"].is_object())
            throwParse("scene.json: cameras must be an object keyed by name");
        for (const auto &item : j["cameras"].items())
            s.cameras[item.key()] = cameraFromJson(item.value());
    }
    s.validate();
    return s;
}

void
saveSceneBundle(const SceneBundle &s, const std::filesystem::path &dir) {
    s.validate();
    std::filesystem::create_directories(dir);
    saveHeadAsset(*s.model, dir / "head_model.hsa");
    saveSplatFile(localCloud(s.binding, s.head), dir / "head.ply");
    saveBinding(s.binding, dir / "binding.json");
    Json j{{"head_model", "head_model.hsa"},
           {"head", "head.ply"},
           {"binding", "binding.json"},
           {"head_transform", rigidToJson(s.headTransform)},
           {"params", paramsToJson(s.params)}};
    if (!s.background.empty()) {
        saveSplatFile(s.background, dir / "background.ply");
        saveLabels(s.background, dir / "background_labels.csv");
        j["background"]        = "background.ply";
        j["background_labels"] = "background_labels.csv";
    }
    Json cams = Json::object();
    for (const auto &[name, cam] : s.cameras)
        cams[name] = cameraToJson(cam);
    j["cameras"] = cams;
    writeJsonFile(j, dir / "scene.json");
}

namespace {

double
dcFor(double color) {
    return (color - kShColorBias) / kShC0;
}

} // namespace

SceneBundle
makeFixtureScene() {
    SceneBundle s;
    s.model = std::make_shared<HeadModel>(makeSyntheticHead(7, 642, 5, 6, 8));
    const HeadParams neutral = HeadParams::neutral(*s.model);
    BindResult bound = bindToMesh(poseHead(*s.model, neutral), 1, 1.0);
    s.binding        = std::move(bound.binding);
    s.head           = std::move(bound.cloud);

    for (std::size_t i = 0; i < s.head.size(); ++i) {
        s.binding.localLogScales[i] += Vec3::Constant(std::log(1.6));
        const Vec3 &p = s.head.positions[i];
        const Vec3 color(0.62 + 0.18 * std::sin(14.0 * p.y()), 0.45 + 0.12 * std::cos(11.0 * p.x()),
                         0.38 + 0.10 * std::sin(9.0 * p.z() + 1.0));
        ShCoefficients sh;
        for (int ch = 0; ch < 3; ++ch)
            sh.at(0, ch) = dcFor(color[ch]);
        s.head.sh[i]            = sh;
        s.head.opacityLogits[i] = logit(0.85);
    }
    applyDrive(s.binding, poseHead(*s.model, neutral), s.head);

    const double yaw  = 20.0 * std::numbers::pi / 180.0;
    s.headTransform   = {axisAngleToRotation(Vec3(0.0, yaw, 0.0)), Vec3(0.3, -0.1, 2.0)};
    const Vec3 center = s.headTransform.translation;

    // Background shell on a Fibonacci sphere around the head.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    const int count        = 3000;
    const double radius    = 1.5;
    const double golden    = std::numbers::pi * (3.0 - std::sqrt(5.0));
    s.background.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double y   = 1.0 - 2.0 * (i + 0.5) / count;
        const double r   = std::sqrt(1.0 - y * y);
        const double phi = golden * i;
        const Vec3 dir(r * std::cos(phi), y, r * std::sin(phi));
        GaussianCloud one;
        one.positions.push_back(center + radius * dir);
        one.rotations.push_back(Quaternion::identity());
        one.logScales.push_back(Vec3::Constant(std::log(0.06)));
        one.opacityLogits.push_back(logit(0.9));
        ShCoefficients sh;
        const Vec3 color(0.35 + 0.25 * std::sin(3.0 * phi) * r, 0.55 + 0.2 * y,
                         0.5 + 0.2 * std::cos(5.0 * y + phi));
        for (int ch = 0; ch < 3; ++ch) {
            sh.at(0, ch) = dcFor(color[ch]);
            for (int b = 1; b < kShBases; ++b)
                sh.at(b, ch) = jitter(rng);
        }
        one.sh.push_back(sh);
        one.groups.push_back(Group::kBackground);
        one.personFlags.push_back(0);
        s.background.pushFrom(one, 0);
    }

    s.params         = neutral;
    const double deg = std::numbers::pi / 180.0;
    const double azimuths[] = {0.0, 30.0 * deg, -30.0 * deg, 60.0 * deg};
    for (int i = 0; i < 4; ++i) {
        const Vec3 eye = center + 0.6 * Vec3(std::sin(azimuths[i]), -0.05, -std::cos(azimuths[i]));
        s.cameras["cam" + std::to_string(i)] = CameraRig::lookAt(128, 128, 240.0, eye, center);
    }
    s.validate();
    return s;
}

SceneBundle
resolveScene(const std::string &spec) {
    if (spec == "fixture")
        return makeFixtureScene();
    return loadSceneBundle(spec);
}

} // namespace hsplat
