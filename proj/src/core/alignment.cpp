// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "alignment.hpp"

#include "error.hpp"
#include "json_io.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>

namespace hsplat {

Vec3
rootAdjustedTranslation(const Mat3 &rotation, const Vec3 &translation, const Vec3 &rootJoint) {
    return translation + (Mat3::Identity() - rotation) * rootJoint;
}

RigidTransform
solveAlignment(const CameraPair &pair, const Mat3 &headRotation, const Vec3 &headTranslation,
               const Vec3 &rootJoint) {
    const Mat3 &r1 = pair.headCamera.rotation;
    const Vec3 &t1 = pair.headCamera.translation;
    const Mat3 &r2 = pair.backgroundCamera.rotation;
    const Vec3 &t2 = pair.backgroundCamera.translation;
    const Vec3 tp  = rootAdjustedTranslation(headRotation, headTranslation, rootJoint);

    RigidTransform out;
    out.rotation    = r2.transpose() * r1 * headRotation;
    out.translation = r2.transpose() * (r1 * tp + t1 - t2);
    return out;
}

RigidTransform
solveAlignment(const AlignmentProblem &problem, double tolerance) {
    HS_CHECK_INPUT(!problem.pairs.empty(), "align: at least one camera pair is required");
    HS_CHECK_INPUT(isValidRotation(problem.headRotation), "align: head rotation is not a rotation");
    for (const auto &p : problem.pairs)
        HS_CHECK_INPUT(isValidRotation(p.headCamera.rotation) && isValidRotation(p.backgroundCamera.rotation),
                       "align: camera rotation is not a rotation");

    const RigidTransform first = solveAlignment(problem.pairs.front(), problem.headRotation,
                                                problem.headTranslation, problem.rootJoint);
    for (std::size_t i = 1; i < problem.pairs.size(); ++i) {
        const RigidTransform other = solveAlignment(problem.pairs[i], problem.headRotation,
                                                    problem.headTranslation, problem.rootJoint);
        const double diff = (other.matrix() - first.matrix()).cwiseAbs().maxCoeff();
        if (!(diff <= tolerance))
            throwNumerical("align: camera pair " + std::to_string(i) +
                           " disagrees with pair 0 (max difference " + std::to_string(diff) + ")");
    }
    return first;
}

CorrespondenceFit
rigidFromCorrespondences(const std::vector<Vec3> &src, const std::vector<Vec3> &dst, bool withScale) {
    HS_CHECK_INPUT(src.size() == dst.size(), "correspondences: point counts differ");
    if (src.size() < 3)
        throwNumerical("correspondences: need at least 3 points");
    const long m = static_cast<long>(src.size());
    Eigen::Matrix3Xd a(3, m), b(3, m);
    for (long i = 0; i < m; ++i) {
        a.col(i) = src[static_cast<std::size_t>(i)];
        b.col(i) = dst[static_cast<std::size_t>(i)];
    }

    const Eigen::Matrix3Xd centered = a.colwise() - a.rowwise().mean();
    const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
    const auto sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
        throwNumerical("correspondences: rank-deficient (collinear or coincident) source points");

    const Mat4 t = Eigen::umeyama(a, b, withScale);
    CorrespondenceFit fit;
    const Mat3 sr = t.topLeftCorner<3, 3>();
    fit.scale     = withScale ? std::cbrt(sr.determinant()) : 1.0;
    fit.transform.rotation    = sr / fit.scale;
    fit.transform.translation = t.topRightCorner<3, 1>();

    double sq = 0.0;
    for (long i = 0; i < m; ++i)
        sq += (b.col(i) - (sr * a.col(i) + fit.transform.translation)).squaredNorm();
    fit.rms = std::sqrt(sq / static_cast<double>(m));
    return fit;
}

namespace {

Mat3
rotationFromQuatJson(const Json &j) {
    const auto q = numberArray(j, "head_rotation", 4);
    return quatToRotation({q[0], q[1], q[2], q[3]});
}

Vec3
vec3FromJson(const Json &j, const std::string &what) {
    const auto v = numberArray(j, what, 3);
    return {v[0], v[1], v[2]};
}

} // namespace

AlignmentProblem
loadAlignmentProblem(const std::filesystem::path &path) {
    const Json j = readJsonFile(path);
    if (!j.is_object())
        throwParse(path.string() + ": expected an object");
    AlignmentProblem p;
    auto pairFrom = [](const Json &o) {
        if (!o.contains("head_camera") || !o.contains("background_camera"))
            throwParse("alignment problem: missing head_camera or background_camera");
        return CameraPair{rigidFromJson(o["head_camera"], "head_camera"),
                          rigidFromJson(o["background_camera"], "background_camera")};
    };
    if (j.contains("pairs")) {
        if (!j["pairs"].is_array())
            throwParse("alignment problem: pairs must be a list");
        for (const Json &o : j["pairs"])
            p.pairs.push_back(pairFrom(o));
    } else {
        p.pairs.push_back(pairFrom(j));
    }
    if (j.contains("head_rotation"))
        p.headRotation = rotationFromQuatJson(j["head_rotation"]);
    if (j.contains("head_translation"))
        p.headTranslation = vec3FromJson(j["head_translation"], "head_translation");
    if (j.contains("root_joint"))
        p.rootJoint = vec3FromJson(j["root_joint"], "root_joint");
    return p;
}

void
saveAlignmentProblem(const AlignmentProblem &problem, const std::filesystem::path &path) {
    Json pairs = Json::array();
    for (const auto &p : problem.pairs)
        pairs.push_back({{"head_camera", rigidToJson(p.headCamera)},
                         {"background_camera", rigidToJson(p.backgroundCamera)}});
    const Quaternion q = rotationToQuat(problem.headRotation);
    writeJsonFile(Json{{"pairs", pairs},
                       {"head_rotation", {q.w, q.x, q.y, q.z}},
                       {"head_translation",
                        {problem.headTranslation.x(), problem.headTranslation.y(),
                         problem.headTranslation.z()}},
                       {"root_joint",
                        {problem.rootJoint.x(), problem.rootJoint.y(), problem.rootJoint.z()}}},
                  path);
}

void
saveAlignmentResult(const RigidTransform &transform, const std::filesystem::path &path) {
    writeJsonFile(Json{{"transform", rigidToJson(transform)}}, path);
}

} // namespace hsplat
