// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "json_io.hpp"

#include "error.hpp"

#include <fstream>

namespace hsplat {

Json
readJsonFile(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throwParse("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception &e) {
        throwParse(path.string() + ": " + e.what());
    }
}

void
writeJsonFile(const Json &j, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out)
        throwRuntime("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<double>
numberArray(const Json &j, const std::string &what, long expected) {
    if (!j.is_array())
        throwParse(what + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto &v : j) {
        if (!v.is_number())
            throwParse(what + ": expected an array of numbers");
        out.push_back(v.get<double>());
    }
    if (expected >= 0 && static_cast<long>(out.size()) != expected)
        throwInvalid(what + ": expected " + std::to_string(expected) + " values, got " +
                     std::to_string(out.size()));
    return out;
}

Json
mat4ToJson(const Mat4 &m) {
    Json out = Json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            out.push_back(m(r, c));
    return out;
}

Mat4
mat4FromJson(const Json &j, const std::string &what) {
    const auto v = numberArray(j, what, 16);
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
    return m;
}

Json
rigidToJson(const RigidTransform &t) {
    return mat4ToJson(t.matrix());
}

RigidTransform
rigidFromJson(const Json &j, const std::string &what) {
    try {
        return RigidTransform::fromMatrix(mat4FromJson(j, what));
    } catch (const Error &e) {
        throw Error(e.kind(), what + ": " + e.what());
    }
}

Json
cameraToJson(const CameraRig &camera) {
    return Json{{"width", camera.width},
                {"height", camera.height},
                {"fx", camera.fx},
                {"fy", camera.fy},
                {"cx", camera.cx},
                {"cy", camera.cy},
                {"near", camera.nearPlane},
                {"far", camera.farPlane},
                {"world_to_camera", rigidToJson(camera.worldToCamera)}};
}

CameraRig
cameraFromJson(const Json &j) {
    if (!j.is_object())
        throwParse("camera: expected an object");
    CameraRig c;
    try {
        c.width  = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.fx     = j.at("fx").get<double>();
        c.fy     = j.at("fy").get<double>();
        c.cx     = j.at("cx").get<double>();
        c.cy     = j.at("cy").get<double>();
        c.nearPlane = j.value("near", c.nearPlane);
        c.farPlane  = j.value("far", c.farPlane);
    } catch (const Json::exception &e) {
        throwParse(std::string("camera: ") + e.what());
    }
    if (!j.contains("world_to_camera"))
        throwParse("camera: missing world_to_camera");
    c.worldToCamera = rigidFromJson(j.at("world_to_camera"), "camera.world_to_camera");
    c.validate();
    return c;
}

Json
paramsToJson(const HeadParams &params) {
    Json pose = Json::array();
    for (const Vec3 &p : params.pose)
        pose.push_back({p.x(), p.y(), p.z()});
    Json rot = Json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            rot.push_back(params.globalRotation(r, c));
    return Json{{"shape", std::vector<double>(params.shape.begin(), params.shape.end())},
                {"expression",
                 std::vector<double>(params.expression.begin(), params.expression.end())},
                {"pose", pose},
                {"global_rotation", rot},
                {"global_translation",
                 {params.globalTranslation.x(), params.globalTranslation.y(),
                  params.globalTranslation.z()}}};
}

void
updateParamsFromJson(const Json &j, const HeadModel &model, HeadParams &params) {
    if (!j.is_object())
        throwParse("head params: expected an object");
    if (j.contains("shape")) {
        const auto v = numberArray(j["shape"], "shape", model.shapeDims());
        params.shape = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    }
    if (j.contains("expression")) {
        const auto v  = numberArray(j["expression"], "expression", model.expressionDims());
        params.expression =
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    }
    if (j.contains("pose")) {
        const Json &p = j["pose"];
        if (!p.is_array() || static_cast<int>(p.size()) != model.jointCount())
            throwInvalid("pose: expected " + std::to_string(model.jointCount()) +
                         " axis-angle triples");
        std::vector<Vec3> pose;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto v = numberArray(p[i], "pose[" + std::to_string(i) + "]", 3);
            pose.emplace_back(v[0], v[1], v[2]);
        }
        params.pose = std::move(pose);
    }
    if (j.contains("global_rotation")) {
        const auto v = numberArray(j["global_rotation"], "global_rotation", 9);
        Mat3 r;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                r(a, b) = v[static_cast<std::size_t>(a * 3 + b)];
        if (!isValidRotation(r))
            throwInvalid("global_rotation: not a proper rotation");
        params.globalRotation = r;
    }
    if (j.contains("global_translation")) {
        const auto v = numberArray(j["global_translation"], "global_translation", 3);
        params.globalTranslation = Vec3(v[0], v[1], v[2]);
    }
    params.checkAgainst(model);
}

HeadParams
paramsFromJson(const Json &j, const HeadModel &model) {
    HeadParams p = HeadParams::neutral(model);
    updateParamsFromJson(j, model, p);
    return p;
}

} // namespace hsplat
