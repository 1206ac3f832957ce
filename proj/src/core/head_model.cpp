// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "head_model.hpp"

#include "error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>

namespace hsplat {

static_assert(std::endian::native == std::endian::little,
              "asset and splat I/O assume a little-endian host");

namespace {

std::string
fieldError(const std::string &field, const std::string &what) {
    return field + ": " + what;
}

void
checkRowsSumToOne(const DenseRows &m, const std::string &field, bool nonNegative) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double sum = m.row(r).sum();
        if (!std::isfinite(sum) || std::abs(sum - 1.0) > 1e-5)
            throwInvalid(fieldError(field, "row " + std::to_string(r) + " sums to " +
                                               std::to_string(sum) + ", expected 1"));
        if (nonNegative && m.row(r).minCoeff() < 0.0)
            throwInvalid(fieldError(field, "row " + std::to_string(r) + " has a negative weight"));
    }
}

/// Topological order of joints (parents before children).
std::vector<int>
jointOrder(const HeadModel &model) {
    const int J = model.jointCount();
    std::vector<std::vector<int>> children(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j)
        if (model.parents[static_cast<std::size_t>(j)] >= 0)
            children[static_cast<std::size_t>(model.parents[static_cast<std::size_t>(j)])]
                .push_back(j);
    std::vector<int> order{model.rootJoint};
    for (std::size_t i = 0; i < order.size(); ++i)
        for (int c : children[static_cast<std::size_t>(order[i])])
            order.push_back(c);
    return order;
}

} // namespace

void
HeadModel::validate() const {
    const Eigen::Index V = templateVertices.rows();
    const int J          = jointCount();
    if (V <= 0)
        throwInvalid(fieldError("template_vertices", "mesh has no vertices"));
    if (!templateVertices.allFinite())
        throwInvalid(fieldError("template_vertices", "contains non-finite values"));
    if (!faces || faces->empty())
        throwInvalid(fieldError("faces", "mesh has no faces"));
    for (std::size_t f = 0; f < faces->size(); ++f)
        for (std::uint32_t v : (*faces)[f])
            if (v >= static_cast<std::uint32_t>(V))
                throwInvalid(fieldError("faces", "face " + std::to_string(f) +
                                                     " references vertex " + std::to_string(v)));
    const auto checkBasis = [&](const DenseRows &b, const char *name) {
        if (b.rows() != 3 * V)
            throwInvalid(fieldError(name, "expected " + std::to_string(3 * V) + " rows, got " +
                                              std::to_string(b.rows())));
        if (!b.allFinite())
            throwInvalid(fieldError(name, "contains non-finite values"));
    };
    checkBasis(shapeBasis, "shape_basis");
    checkBasis(expressionBasis, "expression_basis");
    checkBasis(poseBasis, "pose_basis");
    if (J <= 0)
        throwInvalid(fieldError("kinematic_parents", "model has no joints"));
    if (poseBasis.cols() != 9 * (J - 1))
        throwInvalid(fieldError("pose_basis", "expected " + std::to_string(9 * (J - 1)) +
                                                  " columns (9 per non-root joint)"));
    if (jointRegressor.rows() != J || jointRegressor.cols() != V)
        throwInvalid(fieldError("joint_regressor", "shape must be J x V"));
    if (skinningWeights.rows() != V || skinningWeights.cols() != J)
        throwInvalid(fieldError("skinning_weights", "shape must be V x J"));
    checkRowsSumToOne(jointRegressor, "joint_regressor", false);
    checkRowsSumToOne(skinningWeights, "skinning_weights", true);

    if (rootJoint < 0 || rootJoint >= J)
        throwInvalid(fieldError("root_joint_index", "out of range"));
    for (int j = 0; j < J; ++j) {
        const int p = parents[static_cast<std::size_t>(j)];
        if (j == rootJoint) {
            if (p != -1)
                throwInvalid(fieldError("kinematic_parents", "root joint must have parent -1"));
        } else if (p < 0 || p >= J || p == j) {
            throwInvalid(fieldError("kinematic_parents",
                                    "joint " + std::to_string(j) + " has invalid parent"));
        }
    }
    if (static_cast<int>(jointOrder(*this).size()) != J)
        throwInvalid(fieldError("kinematic_parents", "parent graph is not a tree"));
}

HeadParams
HeadParams::neutral(const HeadModel &model) {
    HeadParams p;
    p.shape      = Eigen::VectorXd::Zero(model.shapeDims());
    p.expression = Eigen::VectorXd::Zero(model.expressionDims());
    p.pose.assign(static_cast<std::size_t>(model.jointCount()), Vec3::Zero());
    return p;
}

void
HeadParams::checkAgainst(const HeadModel &model) const {
    HS_CHECK_INPUT(shape.size() == model.shapeDims(),
                   "shape parameter length " + std::to_string(shape.size()) + " != model " +
                       std::to_string(model.shapeDims()));
    HS_CHECK_INPUT(expression.size() == model.expressionDims(),
                   "expression parameter length " + std::to_string(expression.size()) +
                       " != model " + std::to_string(model.expressionDims()));
    HS_CHECK_INPUT(static_cast<int>(pose.size()) == model.jointCount(),
                   "pose needs one axis-angle per joint (" + std::to_string(model.jointCount()) +
                       ")");
    HS_CHECK_INPUT(isValidRotation(globalRotation), "global rotation is not a proper rotation");
    HS_CHECK_INPUT(globalTranslation.allFinite(), "global translation is not finite");
}

PosedMesh
makePosedMesh(Vertices vertices, std::shared_ptr<const FaceList> faces) {
    PosedMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces    = std::move(faces);
    const std::size_t F = mesh.faces ? mesh.faces->size() : 0;
    mesh.faceFrames.resize(F);
    mesh.barycenters.resize(F);
    mesh.faceAreas.resize(F);
    for (std::size_t f = 0; f < F; ++f) {
        const Face &face = (*mesh.faces)[f];
        const Vec3 v0    = mesh.vertices.row(face[0]).transpose();
        const Vec3 v1    = mesh.vertices.row(face[1]).transpose();
        const Vec3 v2    = mesh.vertices.row(face[2]).transpose();
        mesh.barycenters[f] = (v0 + v1 + v2) / 3.0;
        const Vec3 e1       = v1 - v0;
        const Vec3 n        = e1.cross(v2 - v0);
        mesh.faceAreas[f]   = 0.5 * n.norm();
        if (e1.norm() < 1e-12 || n.norm() < 1e-18) {
            mesh.faceFrames[f] = Mat3::Identity();
            continue;
        }
        Mat3 frame;
        frame.col(0)        = e1.normalized();
        frame.col(2)        = n.normalized();
        frame.col(1)        = frame.col(2).cross(frame.col(0));
        mesh.faceFrames[f] = frame;
    }
    return mesh;
}

Eigen::VectorXd
poseFeature(const HeadModel &model, const HeadParams &params) {
    const int J = model.jointCount();
    Eigen::VectorXd feature(9 * (J - 1));
    int slot = 0;
    for (int j = 0; j < J; ++j) {
        if (j == model.rootJoint)
            continue;
        const Mat3 d = axisAngleToRotation(params.pose[static_cast<std::size_t>(j)]) -
                       Mat3::Identity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                feature[9 * slot + 3 * r + c] = d(r, c);
        ++slot;
    }
    return feature;
}

namespace {

Vertices
unflatten(const Eigen::VectorXd &flat) {
    Vertices v(flat.size() / 3, 3);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        v.row(i) << flat[3 * i], flat[3 * i + 1], flat[3 * i + 2];
    return v;
}

Eigen::VectorXd
flatten(const Vertices &v) {
    Eigen::VectorXd flat(v.rows() * 3);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (int c = 0; c < 3; ++c)
            flat[3 * i + c] = v(i, c);
    return flat;
}

} // namespace

Vertices
deformCanonical(const HeadModel &model, const HeadParams &params) {
    params.checkAgainst(model);
    Eigen::VectorXd flat = flatten(model.templateVertices);
    flat += model.shapeBasis * params.shape;
    flat += model.expressionBasis * params.expression;
    if (model.poseBasis.cols() > 0)
        flat += model.poseBasis * poseFeature(model, params);
    return unflatten(flat);
}

Vertices
regressJoints(const HeadModel &model, const Eigen::VectorXd &shape) {
    HS_CHECK_INPUT(shape.size() == model.shapeDims(), "shape parameter length mismatch");
    Eigen::VectorXd flat = flatten(model.templateVertices) + model.shapeBasis * shape;
    return model.jointRegressor * unflatten(flat);
}

PosedMesh
skin(const HeadModel &model, const Vertices &canonical, const HeadParams &params) {
    params.checkAgainst(model);
    HS_CHECK_INPUT(canonical.rows() == model.vertexCount(), "canonical vertex count mismatch");

    const Vertices joints = regressJoints(model, params.shape);
    const int J           = model.jointCount();

    std::vector<Mat3> worldRot(static_cast<std::size_t>(J));
    std::vector<Vec3> worldPos(static_cast<std::size_t>(J));
    for (int j : jointOrder(model)) {
        const auto js    = static_cast<std::size_t>(j);
        const Mat3 local = axisAngleToRotation(params.pose[js]);
        const Vec3 joint = joints.row(j).transpose();
        const int p      = model.parents[js];
        if (p < 0) {
            worldRot[js] = local;
            worldPos[js] = joint;
        } else {
            const auto ps = static_cast<std::size_t>(p);
            worldRot[js]  = worldRot[ps] * local;
            worldPos[js]  = worldRot[ps] * (joint - joints.row(p).transpose()) + worldPos[ps];
        }
    }
    // Remove the rest pose: A_j(x) = R_j (x - J_j) + G_j.t
    std::vector<Vec3> restOffset(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
        const auto js  = static_cast<std::size_t>(j);
        restOffset[js] = worldPos[js] - worldRot[js] * joints.row(j).transpose();
    }

    const Vec3 root = joints.row(model.rootJoint).transpose();
    const Mat3 &Rg  = params.globalRotation;
    const Vec3 tg   = params.globalTranslation;

    Vertices posed(canonical.rows(), 3);
    for (Eigen::Index v = 0; v < canonical.rows(); ++v) {
        Mat3 blendR = Mat3::Zero();
        Vec3 blendT = Vec3::Zero();
        for (int j = 0; j < J; ++j) {
            const double w = model.skinningWeights(v, j);
            if (w == 0.0)
                continue;
            blendR += w * worldRot[static_cast<std::size_t>(j)];
            blendT += w * restOffset[static_cast<std::size_t>(j)];
        }
        const Vec3 x     = blendR * canonical.row(v).transpose() + blendT;
        posed.row(v)     = (Rg * (x - root) + root + tg).transpose();
    }
    return makePosedMesh(std::move(posed), model.faces);
}

PosedMesh
poseHead(const HeadModel &model, const HeadParams &params) {
    return skin(model, deformCanonical(model, params), params);
}

Image
rasterizeMeshDepth(const PosedMesh &mesh, const CameraRig &camera) {
    camera.validate();
    Image depth(camera.width, camera.height, 1, std::numeric_limits<double>::infinity());
    if (!mesh.faces)
        return depth;

    const Eigen::Index V = mesh.vertices.rows();
    std::vector<Vec3> cam(static_cast<std::size_t>(V));
    std::vector<Vec2> pix(static_cast<std::size_t>(V));
    for (Eigen::Index v = 0; v < V; ++v) {
        cam[static_cast<std::size_t>(v)] = camera.toCamera(mesh.vertices.row(v).transpose());
        if (cam[static_cast<std::size_t>(v)].z() > 0.0)
            pix[static_cast<std::size_t>(v)] = camera.project(cam[static_cast<std::size_t>(v)]);
    }

    for (const Face &face : *mesh.faces) {
        const Vec3 &p0 = cam[face[0]], &p1 = cam[face[1]], &p2 = cam[face[2]];
        if (p0.z() < camera.nearPlane || p1.z() < camera.nearPlane || p2.z() < camera.nearPlane)
            continue;
        const Vec2 &a = pix[face[0]], &b = pix[face[1]], &c = pix[face[2]];
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(area) < 1e-12)
            continue;

        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
        const int x1 = std::min(camera.width - 1,
                                static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
        const int y1 = std::min(camera.height - 1,
                                static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2 p(x, y);
                // Edge functions normalized so they sum to one.
                const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
                const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                    continue;
                const double z = 1.0 / (w0 / p0.z() + w1 / p1.z() + w2 / p2.z());
                double &slot   = depth.at(x, y);
                if (z < slot)
                    slot = z;
            }
        }
    }
    return depth;
}

// ---------------------------------------------------------------------------
// Asset container

namespace {

constexpr const char *kAssetMagic = "headsplat-asset 1";

struct FieldSpec {
    std::string name;
    std::string dtype;
    std::vector<std::int64_t> shape;
    std::uint64_t offset = 0;

    std::uint64_t
    count() const {
        std::uint64_t n = 1;
        for (auto s : shape)
            n *= static_cast<std::uint64_t>(s);
        return n;
    }
};

void
appendFloats(std::string &blob, const double *values, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float f = static_cast<float>(values[i]);
        blob.append(reinterpret_cast<const char *>(&f), sizeof f);
    }
}

void
appendU32(std::string &blob, const std::vector<std::uint32_t> &values) {
    blob.append(reinterpret_cast<const char *>(values.data()), values.size() * 4);
}

} // namespace

void
saveHeadAsset(const HeadModel &model, const std::filesystem::path &path) {
    model.validate();
    const std::int64_t V = model.vertexCount();
    const std::int64_t J = model.jointCount();

    std::string blob;
    nlohmann::json fields = nlohmann::json::array();
    const auto addFloatField = [&](const std::string &name, const std::vector<std::int64_t> &shape,
                                   const double *data, std::size_t n) {
        fields.push_back({{"name", name}, {"dtype", "float32"}, {"shape", shape},
                          {"offset", blob.size()}});
        appendFloats(blob, data, n);
    };
    const auto addU32Field = [&](const std::string &name, const std::vector<std::int64_t> &shape,
                                 const std::vector<std::uint32_t> &data) {
        fields.push_back({{"name", name}, {"dtype", "uint32"}, {"shape", shape},
                          {"offset", blob.size()}});
        appendU32(blob, data);
    };

    addFloatField("template_vertices", {V, 3}, model.templateVertices.data(),
                  static_cast<std::size_t>(model.templateVertices.size()));
    std::vector<std::uint32_t> faceData;
    for (const Face &f : *model.faces)
        faceData.insert(faceData.end(), f.begin(), f.end());
    addU32Field("faces", {static_cast<std::int64_t>(model.faces->size()), 3}, faceData);
    addFloatField("shape_basis", {V, 3, model.shapeBasis.cols()}, model.shapeBasis.data(),
                  static_cast<std::size_t>(model.shapeBasis.size()));
    addFloatField("pose_basis", {V, 3, model.poseBasis.cols()}, model.poseBasis.data(),
                  static_cast<std::size_t>(model.poseBasis.size()));
    addFloatField("expression_basis", {V, 3, model.expressionBasis.cols()},
                  model.expressionBasis.data(),
                  static_cast<std::size_t>(model.expressionBasis.size()));
    addFloatField("joint_regressor", {J, V}, model.jointRegressor.data(),
                  static_cast<std::size_t>(model.jointRegressor.size()));
    addFloatField("skinning_weights", {V, J}, model.skinningWeights.data(),
                  static_cast<std::size_t>(model.skinningWeights.size()));
    std::vector<std::uint32_t> parents;
    for (int p : model.parents)
        parents.push_back(p < 0 ? 0xFFFFFFFFu : static_cast<std::uint32_t>(p));
    addU32Field("kinematic_parents", {J}, parents);

    nlohmann::json header = {{"root_joint_index", model.rootJoint},
                             {"byte_order", "little"},
                             {"fields", fields}};
    const std::string headerText = header.dump(1) + "\n";

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throwRuntime("cannot write head asset '" + path.string() + "'");
    out << kAssetMagic << "\n" << "header_bytes " << headerText.size() << "\n" << headerText;
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out)
        throwRuntime("failed writing head asset '" + path.string() + "'");
}

HeadModel
loadHeadAsset(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throwParse("cannot open head asset '" + path.string() + "'");
    std::string magic;
    std::getline(in, magic);
    if (magic != kAssetMagic)
        throwParse("'" + path.string() + "' is not a head asset container");
    std::string sizeLine;
    std::getline(in, sizeLine);
    std::size_t headerBytes = 0;
    if (std::sscanf(sizeLine.c_str(), "header_bytes %zu", &headerBytes) != 1 ||
        headerBytes > (64u << 20))
        throwParse("head asset: malformed header_bytes line");
    std::string headerText(headerBytes, '\0');
    in.read(headerText.data(), static_cast<std::streamsize>(headerBytes));
    if (!in)
        throwParse("head asset: truncated header");
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(headerText);
    } catch (const nlohmann::json::exception &e) {
        throwParse(std::string("head asset: header is not valid structured text: ") + e.what());
    }

    std::map<std::string, FieldSpec> specs;
    try {
        for (const auto &f : header.at("fields")) {
            FieldSpec s;
            s.name   = f.at("name").get<std::string>();
            s.dtype  = f.at("dtype").get<std::string>();
            s.shape  = f.at("shape").get<std::vector<std::int64_t>>();
            s.offset = f.at("offset").get<std::uint64_t>();
            specs[s.name] = s;
        }
    } catch (const nlohmann::json::exception &e) {
        throwParse(std::string("head asset: malformed field table: ") + e.what());
    }

    const auto field = [&](const std::string &name, const std::string &dtype,
                           std::size_t rank) -> const FieldSpec & {
        auto it = specs.find(name);
        if (it == specs.end())
            throwParse("head asset: missing field " + name);
        const FieldSpec &s = it->second;
        if (s.dtype != dtype)
            throwParse("head asset: field " + name + " must be " + dtype);
        if (s.shape.size() != rank)
            throwParse("head asset: field " + name + " has wrong rank");
        for (auto d : s.shape)
            if (d < 0)
                throwParse("head asset: field " + name + " has a negative dimension");
        if (s.offset + s.count() * 4 > blob.size())
            throwParse("head asset: field " + name + " extends past end of file");
        return s;
    };
    const auto readFloats = [&](const FieldSpec &s, double *dst) {
        const char *src = blob.data() + s.offset;
        for (std::uint64_t i = 0; i < s.count(); ++i) {
            float f;
            std::memcpy(&f, src + 4 * i, 4);
            dst[i] = f;
        }
    };
    const auto readU32 = [&](const FieldSpec &s) {
        std::vector<std::uint32_t> v(s.count());
        std::memcpy(v.data(), blob.data() + s.offset, v.size() * 4);
        return v;
    };

    HeadModel m;
    const FieldSpec &tv = field("template_vertices", "float32", 2);
    if (tv.shape[1] != 3)
        throwParse("head asset: template_vertices must be V x 3");
    const std::int64_t V = tv.shape[0];
    m.templateVertices.resize(V, 3);
    readFloats(tv, m.templateVertices.data());

    const FieldSpec &fs = field("faces", "uint32", 2);
    if (fs.shape[1] != 3)
        throwParse("head asset: faces must be F x 3");
    const auto faceData = readU32(fs);
    auto faces          = std::make_shared<FaceList>(static_cast<std::size_t>(fs.shape[0]));
    for (std::size_t f = 0; f < faces->size(); ++f)
        (*faces)[f] = {faceData[3 * f], faceData[3 * f + 1], faceData[3 * f + 2]};
    m.faces = std::move(faces);

    const auto readBasis = [&](const char *name, DenseRows &dst) {
        const FieldSpec &s = field(name, "float32", 3);
        if (s.shape[0] != V || s.shape[1] != 3)
            throwParse(std::string("head asset: ") + name + " must be V x 3 x K");
        dst.resize(3 * V, s.shape[2]);
        readFloats(s, dst.data());
    };
    readBasis("shape_basis", m.shapeBasis);
    readBasis("pose_basis", m.poseBasis);
    readBasis("expression_basis", m.expressionBasis);

    const FieldSpec &jr = field("joint_regressor", "float32", 2);
    m.jointRegressor.resize(jr.shape[0], jr.shape[1]);
    readFloats(jr, m.jointRegressor.data());
    const FieldSpec &sw = field("skinning_weights", "float32", 2);
    m.skinningWeights.resize(sw.shape[0], sw.shape[1]);
    readFloats(sw, m.skinningWeights.data());

    const FieldSpec &kp = field("kinematic_parents", "uint32", 1);
    for (std::uint32_t p : readU32(kp))
        m.parents.push_back(p == 0xFFFFFFFFu ? -1 : static_cast<int>(p));
    try {
        m.rootJoint = header.at("root_joint_index").get<int>();
    } catch (const nlohmann::json::exception &) {
        throwParse("head asset: missing root_joint_index");
    }

    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Synthetic fixture

namespace {

struct Icosphere {
    std::vector<Vec3> vertices;
    FaceList faces;
};

Icosphere
makeIcosphere(int subdivisions) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Icosphere s;
    s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto &v : s.vertices)
        v.normalize();
    s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4}, {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},  {9, 8, 1}};
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        const auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it        = midpoints.find(key);
            if (it != midpoints.end())
                return it->second;
            s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
            const auto idx = static_cast<std::uint32_t>(s.vertices.size() - 1);
            midpoints.emplace(key, idx);
            return idx;
        };
        FaceList next;
        next.reserve(s.faces.size() * 4);
        for (const Face &f : s.faces) {
            const std::uint32_t a = midpoint(f[0], f[1]);
            const std::uint32_t b = midpoint(f[1], f[2]);
            const std::uint32_t c = midpoint(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        s.faces = std::move(next);
    }
    return s;
}

double
toFloat(double v) {
    return static_cast<double>(static_cast<float>(v));
}

} // namespace

HeadModel
makeSyntheticHead(std::uint64_t seed, int vertexCount, int jointCount, int shapeDims,
                  int expressionDims) {
    HS_CHECK_INPUT(jointCount > 0 && shapeDims >= 0 && expressionDims >= 0,
                   "synthetic head dimensions must be positive");
    int subdivisions = -1;
    for (int s = 0; s <= 6; ++s)
        if (10 * (1 << (2 * s)) + 2 == vertexCount)
            subdivisions = s;
    HS_CHECK_INPUT(subdivisions >= 0,
                   "synthetic head vertex count must be 10*4^s+2 (12, 42, 162, 642, 2562, ...)");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    Icosphere sphere = makeIcosphere(subdivisions);
    const Vec3 radii(0.08, 0.105, 0.095);
    const Vec3 bumpFreq(unit(rng) * 3.0, unit(rng) * 3.0, unit(rng) * 3.0);
    const double bumpPhase = phase(rng);

    HeadModel m;
    const auto V = static_cast<Eigen::Index>(sphere.vertices.size());
    m.templateVertices.resize(V, 3);
    for (Eigen::Index v = 0; v < V; ++v) {
        const Vec3 &d       = sphere.vertices[static_cast<std::size_t>(v)];
        const double bump   = 1.0 + 0.04 * std::sin(bumpFreq.dot(d) * 2.0 + bumpPhase);
        const Vec3 p        = d.cwiseProduct(radii) * bump;
        m.templateVertices.row(v) = p.transpose();
    }
    m.templateVertices = m.templateVertices.cast<float>().cast<double>();
    m.faces = std::make_shared<const FaceList>(std::move(sphere.faces));

    // Smooth bases: each column is a low-frequency sinusoidal field.
    const auto smoothBasis = [&](int columns, double amplitude) {
        DenseRows b(3 * V, columns);
        for (int k = 0; k < columns; ++k) {
            for (int axis = 0; axis < 3; ++axis) {
                const Vec3 freq(unit(rng) * 25.0, unit(rng) * 25.0, unit(rng) * 25.0);
                const double ph = phase(rng);
                for (Eigen::Index v = 0; v < V; ++v) {
                    const Vec3 p = m.templateVertices.row(v).transpose();
                    b(3 * v + axis, k) = toFloat(amplitude * std::sin(freq.dot(p) + ph));
                }
            }
        }
        return b;
    };
    m.shapeBasis      = smoothBasis(shapeDims, 0.004);
    m.expressionBasis = smoothBasis(expressionDims, 0.003);
    m.poseBasis       = smoothBasis(9 * (jointCount - 1), 0.002);

    m.parents.resize(static_cast<std::size_t>(jointCount));
    m.parents[0] = -1;
    for (int j = 1; j < jointCount; ++j)
        m.parents[static_cast<std::size_t>(j)] = (j - 1) / 2;
    m.rootJoint = 0;

    // Root regresses to the centroid; other joints to the centroid of a
    // vertex cap, which lies inside the surface.
    m.jointRegressor = DenseRows::Zero(jointCount, V);
    for (int j = 0; j < jointCount; ++j) {
        std::vector<Eigen::Index> members;
        if (j == 0) {
            for (Eigen::Index v = 0; v < V; ++v)
                members.push_back(v);
        } else {
            Vec3 dir(unit(rng), unit(rng), unit(rng));
            if (dir.norm() < 1e-3)
                dir = Vec3(0, -1, 0);
            dir.normalize();
            for (Eigen::Index v = 0; v < V; ++v)
                if (m.templateVertices.row(v).normalized().dot(dir.transpose()) > 0.6)
                    members.push_back(v);
            if (members.empty())
                for (Eigen::Index v = 0; v < V; ++v)
                    members.push_back(v);
        }
        for (Eigen::Index v : members)
            m.jointRegressor(j, v) = toFloat(1.0 / static_cast<double>(members.size()));
    }

    const Vertices joints = m.jointRegressor * m.templateVertices;
    m.skinningWeights.resize(V, jointCount);
    for (Eigen::Index v = 0; v < V; ++v) {
        Eigen::VectorXd w(jointCount);
        for (int j = 0; j < jointCount; ++j) {
            const double d2 = (m.templateVertices.row(v) - joints.row(j)).squaredNorm();
            w[j]            = std::exp(-d2 / (2.0 * 0.05 * 0.05));
        }
        w /= w.sum();
        for (int j = 0; j < jointCount; ++j)
            m.skinningWeights(v, j) = toFloat(w[j]);
    }

    m.validate();
    return m;
}

} // namespace hsplat
