// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "gaussian_scene.hpp"

#include "error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace hsplat {

const char *
groupName(Group g) {
    return g == Group::kHead ? "head" : "background";
}

void
GaussianCloud::resize(std::size_t n) {
    positions.resize(n, Vec3::Zero());
    rotations.resize(n);
    logScales.resize(n, Vec3::Zero());
    opacityLogits.resize(n, 0.0);
    sh.resize(n);
    groups.resize(n, Group::kBackground);
    personFlags.resize(n, 0);
}

void
GaussianCloud::reserve(std::size_t n) {
    positions.reserve(n);
    rotations.reserve(n);
    logScales.reserve(n);
    opacityLogits.reserve(n);
    sh.reserve(n);
    groups.reserve(n);
    personFlags.reserve(n);
}

void
GaussianCloud::pushFrom(const GaussianCloud &other, std::size_t i) {
    positions.push_back(other.positions[i]);
    rotations.push_back(other.rotations[i]);
    logScales.push_back(other.logScales[i]);
    opacityLogits.push_back(other.opacityLogits[i]);
    sh.push_back(other.sh[i]);
    groups.push_back(other.groups[i]);
    personFlags.push_back(other.personFlags[i]);
}

void
GaussianCloud::validate() const {
    const std::size_t n = positions.size();
    HS_CHECK_INPUT(rotations.size() == n && logScales.size() == n && opacityLogits.size() == n &&
                       sh.size() == n && groups.size() == n && personFlags.size() == n,
                   "gaussian cloud arrays have inconsistent lengths");
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const double s = std::exp(logScales[i][a]);
            HS_CHECK_INPUT(std::isfinite(s) && s > 0.0,
                           "gaussian " + std::to_string(i) + " has a non-positive scale");
        }
        HS_CHECK_INPUT(positions[i].allFinite(),
                       "gaussian " + std::to_string(i) + " has a non-finite position");
        HS_CHECK_INPUT(std::isfinite(opacityLogits[i]),
                       "gaussian " + std::to_string(i) + " has a non-finite opacity");
    }
}

void
TriangleBinding::validate() const {
    const std::size_t n = triangles.size();
    HS_CHECK_INPUT(localPositions.size() == n && localRotations.size() == n &&
                       localLogScales.size() == n,
                   "binding arrays have inconsistent lengths");
    HS_CHECK_INPUT(k > 0.0 && std::isfinite(k), "binding scale factor k must be positive");
    for (std::size_t i = 0; i < n; ++i)
        HS_CHECK_INPUT(triangles[i] < faceCount, "binding triangle index out of range");
}

namespace {

/// Barycentric coordinates of the barycenters of a regular subdivision of a
/// triangle into `4^level` pieces (enough to hold `count` points).
std::vector<Vec3>
subTriangleCenters(int count) {
    int n = 1;
    while (n * n < count)
        n *= 2;
    std::vector<Vec3> centers;
    // Grid of n x n sub-triangles (upright and inverted).
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n - i; ++j) {
            centers.emplace_back((i + 1.0 / 3.0) / n, (j + 1.0 / 3.0) / n, 0.0);
            if (j < n - i - 1)
                centers.emplace_back((i + 2.0 / 3.0) / n, (j + 2.0 / 3.0) / n, 0.0);
        }
    }
    for (auto &c : centers)
        c.z() = 1.0 - c.x() - c.y();
    centers.resize(static_cast<std::size_t>(count));
    return centers;
}

} // namespace

BindResult
bindToMesh(const PosedMesh &mesh, int gaussiansPerTriangle, double k) {
    HS_CHECK_INPUT(gaussiansPerTriangle > 0, "gaussians per triangle must be positive");
    HS_CHECK_INPUT(k > 0.0, "binding scale factor k must be positive");
    HS_CHECK_INPUT(mesh.faces != nullptr, "mesh has no faces");

    const std::size_t F = mesh.faces->size();
    const auto per      = static_cast<std::size_t>(gaussiansPerTriangle);
    const std::vector<Vec3> samples =
        gaussiansPerTriangle == 1 ? std::vector<Vec3>{Vec3(1.0, 1.0, 1.0) / 3.0}
                                  : subTriangleCenters(gaussiansPerTriangle);

    BindResult out;
    TriangleBinding &b = out.binding;
    b.k                = k;
    b.faceCount        = F;
    b.triangles.reserve(F * per);
    b.localPositions.reserve(F * per);
    b.localRotations.reserve(F * per);
    b.localLogScales.reserve(F * per);

    for (std::size_t f = 0; f < F; ++f) {
        const Face &face = (*mesh.faces)[f];
        const Vec3 v0    = mesh.vertices.row(face[0]).transpose();
        const Vec3 v1    = mesh.vertices.row(face[1]).transpose();
        const Vec3 v2    = mesh.vertices.row(face[2]).transpose();
        const double meanEdge = ((v1 - v0).norm() + (v2 - v1).norm() + (v0 - v2).norm()) / 3.0;
        const bool degenerate = mesh.faceAreas[f] <= 1e-14;
        if (degenerate)
            ++out.degenerateTriangles;
        const double worldScale = degenerate ? 1e-6 : 0.5 * meanEdge;
        const Mat3 &frame       = mesh.faceFrames[f];

        for (std::size_t s = 0; s < per; ++s) {
            const Vec3 &w     = samples[s];
            const Vec3 offset = w.x() * v0 + w.y() * v1 + w.z() * v2 - mesh.barycenters[f];
            b.triangles.push_back(static_cast<std::uint32_t>(f));
            b.localPositions.push_back(per == 1 ? Vec3::Zero()
                                                : Vec3(frame.transpose() * offset / k));
            b.localRotations.push_back(Quaternion::identity());
            b.localLogScales.push_back(Vec3::Constant(std::log(worldScale / k)));
        }
    }

    GaussianCloud &cloud = out.cloud;
    cloud.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        cloud.groups[i]        = Group::kHead;
        cloud.opacityLogits[i] = logit(0.1);
    }
    applyDrive(b, mesh, cloud);
    return out;
}

DrivenAttributes
drive(const TriangleBinding &binding, const PosedMesh &mesh) {
    binding.validate();
    HS_CHECK_INPUT(mesh.faceCount() == static_cast<int>(binding.faceCount),
                   "binding topology does not match the mesh (" +
                       std::to_string(binding.faceCount) + " vs " +
                       std::to_string(mesh.faceCount()) + " faces)");
    DrivenAttributes out;
    const std::size_t n = binding.size();
    out.positions.resize(n);
    out.rotations.resize(n);
    out.logScales.resize(n);
    const double logK = std::log(binding.k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t f = binding.triangles[i];
        const Mat3 &frame     = mesh.faceFrames[f];
        out.positions[i]      = binding.k * (frame * binding.localPositions[i]) + mesh.barycenters[f];
        out.rotations[i]      = rotationToQuat(frame) * binding.localRotations[i].normalized();
        out.logScales[i]      = binding.localLogScales[i].array() + logK;
    }
    return out;
}

void
applyDrive(const TriangleBinding &binding, const PosedMesh &mesh, GaussianCloud &cloud) {
    HS_CHECK_INPUT(cloud.size() == binding.size(), "cloud and binding sizes differ");
    DrivenAttributes d = drive(binding, mesh);
    cloud.positions    = std::move(d.positions);
    cloud.rotations    = std::move(d.rotations);
    cloud.logScales    = std::move(d.logScales);
}

GaussianCloud
mergeScenes(const GaussianCloud &head, const GaussianCloud &background,
            const RigidTransform &headTransform) {
    const Quaternion qt = rotationToQuat(headTransform.rotation);
    GaussianCloud out;
    out.reserve(head.size() + background.size());
    for (std::size_t i = 0; i < head.size(); ++i) {
        out.pushFrom(head, i);
        out.positions.back() = headTransform.apply(head.positions[i]);
        out.rotations.back() = qt * head.rotations[i];
    }
    for (std::size_t i = 0; i < background.size(); ++i)
        out.pushFrom(background, i);
    return out;
}

// ---------------------------------------------------------------------------
// Splat point files

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t size   = 0;
    std::size_t offset = 0;
};

std::size_t
plyTypeSize(const std::string &t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8")
        return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16")
        return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64")
        return 8;
    return 0;
}

std::vector<std::string>
splatPropertyNames() {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1",
                                      "f_dc_2"};
    for (int i = 0; i < 45; ++i)
        names.push_back("f_rest_" + std::to_string(i));
    names.push_back("opacity");
    for (int i = 0; i < 3; ++i)
        names.push_back("scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i)
        names.push_back("rot_" + std::to_string(i));
    return names;
}

} // namespace

void
saveSplatFile(const GaussianCloud &cloud, const std::filesystem::path &path) {
    cloud.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throwRuntime("cannot write splat file '" + path.string() + "'");
    const auto names = splatPropertyNames();
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
    for (const auto &n : names)
        out << "property float " << n << "\n";
    out << "end_header\n";

    std::vector<float> row(names.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::size_t c = 0;
        for (int a = 0; a < 3; ++a)
            row[c++] = static_cast<float>(cloud.positions[i][a]);
        for (int a = 0; a < 3; ++a)
            row[c++] = 0.0f;
        for (int ch = 0; ch < 3; ++ch)
            row[c++] = static_cast<float>(cloud.sh[i].at(0, ch));
        // f_rest is channel-major: f_rest[ch * 15 + (basis - 1)]
        for (int ch = 0; ch < 3; ++ch)
            for (int k = 1; k < kShBases; ++k)
                row[c++] = static_cast<float>(cloud.sh[i].at(k, ch));
        row[c++]                 = static_cast<float>(cloud.opacityLogits[i]);
        for (int a = 0; a < 3; ++a)
            row[c++] = static_cast<float>(cloud.logScales[i][a]);
        const Quaternion &q = cloud.rotations[i];
        row[c++]            = static_cast<float>(q.w);
        row[c++]            = static_cast<float>(q.x);
        row[c++]            = static_cast<float>(q.y);
        row[c++]            = static_cast<float>(q.z);
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out)
        throwRuntime("failed writing splat file '" + path.string() + "'");
}

GaussianCloud
loadSplatFile(const std::filesystem::path &path, Group group) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throwParse("cannot open splat file '" + path.string() + "'");

    std::string line;
    std::getline(in, line);
    if (line != "ply")
        throwParse("'" + path.string() + "' is not a PLY file");

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<PlyProperty> props;
        std::size_t stride = 0;
    };
    std::vector<Element> elements;
    bool binaryLe = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "end_header")
            break;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            binaryLe = fmt == "binary_little_endian";
        } else if (tok == "element") {
            Element e;
            ls >> e.name >> e.count;
            if (!ls)
                throwParse("splat file: malformed element line '" + line + "'");
            elements.push_back(e);
        } else if (tok == "property") {
            if (elements.empty())
                throwParse("splat file: property before any element");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list")
                throwParse("splat file: list properties are not supported");
            ls >> p.name;
            p.size = plyTypeSize(p.type);
            if (p.size == 0)
                throwParse("splat file: unknown property type '" + p.type + "'");
            Element &e = elements.back();
            p.offset   = e.stride;
            e.stride += p.size;
            e.props.push_back(p);
        }
    }
    if (!binaryLe)
        throwParse("splat file: only binary_little_endian PLY is supported");

    std::size_t skipBytes = 0;
    const Element *vertex = nullptr;
    for (const Element &e : elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        skipBytes += e.count * e.stride;
    }
    if (!vertex)
        throwParse("splat file: no vertex element");
    in.seekg(static_cast<std::streamoff>(skipBytes), std::ios::cur);

    const auto find = [&](const std::string &name) -> const PlyProperty * {
        for (const auto &p : vertex->props)
            if (p.name == name)
                return &p;
        return nullptr;
    };
    const auto require = [&](const std::string &name) -> const PlyProperty & {
        const PlyProperty *p = find(name);
        if (!p)
            throwParse("splat file: missing property '" + name + "'");
        if (p->type != "float" && p->type != "float32" && p->type != "double" &&
            p->type != "float64")
            throwParse("splat file: property '" + name + "' must be floating point");
        return *p;
    };

    const PlyProperty *px = &require("x"), *py = &require("y"), *pz = &require("z");
    const PlyProperty *dc[3] = {&require("f_dc_0"), &require("f_dc_1"), &require("f_dc_2")};
    const PlyProperty *op    = &require("opacity");
    const PlyProperty *sc[3] = {&require("scale_0"), &require("scale_1"), &require("scale_2")};
    const PlyProperty *rot[4] = {&require("rot_0"), &require("rot_1"), &require("rot_2"),
                                 &require("rot_3")};
    // Lower-degree files carry 3 * (bases - 1) rest coefficients.
    int restCount = 0;
    while (find("f_rest_" + std::to_string(restCount)))
        ++restCount;
    if (restCount != 0 && restCount != 9 && restCount != 24 && restCount != 45)
        throwParse("splat file: missing property 'f_rest_" + std::to_string(restCount) + "'");
    std::vector<const PlyProperty *> rest;
    for (int i = 0; i < restCount; ++i)
        rest.push_back(&require("f_rest_" + std::to_string(i)));
    const int restPerChannel = restCount / 3;

    std::vector<char> buffer(vertex->count * vertex->stride);
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (static_cast<std::size_t>(in.gcount()) != buffer.size())
        throwParse("splat file: expected " + std::to_string(vertex->count) +
                   " points but the payload is truncated");

    GaussianCloud cloud;
    cloud.resize(vertex->count);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        const char *rowPtr = buffer.data() + i * vertex->stride;
        const auto get     = [&](const PlyProperty *p) -> double {
            if (p->size == 4) {
                float f;
                std::memcpy(&f, rowPtr + p->offset, 4);
                return f;
            }
            double d;
            std::memcpy(&d, rowPtr + p->offset, 8);
            return d;
        };
        cloud.positions[i] = Vec3(get(px), get(py), get(pz));
        for (int ch = 0; ch < 3; ++ch)
            cloud.sh[i].at(0, ch) = get(dc[ch]);
        for (int ch = 0; ch < 3; ++ch)
            for (int k = 1; k <= restPerChannel; ++k)
                cloud.sh[i].at(k, ch) =
                    get(rest[static_cast<std::size_t>(ch * restPerChannel + k - 1)]);
        cloud.opacityLogits[i] = get(op);
        cloud.logScales[i]     = Vec3(get(sc[0]), get(sc[1]), get(sc[2]));
        cloud.rotations[i]     = {get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3])};
        cloud.groups[i]        = group;
    }
    return cloud;
}

void
saveLabels(const GaussianCloud &cloud, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out)
        throwRuntime("cannot write label file '" + path.string() + "'");
    out << "index,group,person\n";
    for (std::size_t i = 0; i < cloud.size(); ++i)
        out << i << "," << groupName(cloud.groups[i]) << "," << int(cloud.personFlags[i]) << "\n";
}

void
loadLabels(GaussianCloud &cloud, const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throwParse("cannot open label file '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line != "index,group,person")
        throwParse("label file: unexpected header '" + line + "'");
    std::vector<bool> seen(cloud.size(), false);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string idx, grp, person;
        std::getline(ls, idx, ',');
        std::getline(ls, grp, ',');
        std::getline(ls, person, ',');
        std::size_t i = 0;
        try {
            i = std::stoul(idx);
        } catch (...) {
            throwParse("label file: bad index in '" + line + "'");
        }
        if (i >= cloud.size())
            throwParse("label file: index " + idx + " out of range");
        if (grp == "head")
            cloud.groups[i] = Group::kHead;
        else if (grp == "background")
            cloud.groups[i] = Group::kBackground;
        else
            throwParse("label file: unknown group '" + grp + "'");
        if (person != "0" && person != "1")
            throwParse("label file: person flag must be 0 or 1");
        cloud.personFlags[i] = person == "1";
        seen[i]              = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throwParse("label file: missing label for point " + std::to_string(i));
}

void
saveBinding(const TriangleBinding &binding, const std::filesystem::path &path) {
    binding.validate();
    nlohmann::json j = {{"k", binding.k},
                        {"face_count", binding.faceCount},
                        {"triangles", binding.triangles}};
    std::ofstream out(path);
    if (!out)
        throwRuntime("cannot write binding file '" + path.string() + "'");
    out << j.dump() << "\n";
}

TriangleBinding
loadBinding(const std::filesystem::path &path, const GaussianCloud &local) {
    std::ifstream in(path);
    if (!in)
        throwParse("cannot open binding file '" + path.string() + "'");
    TriangleBinding b;
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        b.k                    = j.at("k").get<double>();
        b.faceCount            = j.at("face_count").get<std::size_t>();
        b.triangles            = j.at("triangles").get<std::vector<std::uint32_t>>();
    } catch (const nlohmann::json::exception &e) {
        throwParse("binding file '" + path.string() + "': " + e.what());
    }
    if (b.triangles.size() != local.size())
        throwParse("binding file: " + std::to_string(b.triangles.size()) +
                   " triangles for " + std::to_string(local.size()) + " head points");
    b.localPositions = local.positions;
    b.localRotations = local.rotations;
    b.localLogScales = local.logScales;
    b.validate();
    return b;
}

GaussianCloud
localCloud(const TriangleBinding &binding, const GaussianCloud &appearance) {
    HS_CHECK_INPUT(binding.size() == appearance.size(), "cloud and binding sizes differ");
    GaussianCloud out = appearance;
    out.positions     = binding.localPositions;
    out.rotations     = binding.localRotations;
    out.logScales     = binding.localLogScales;
    return out;
}

} // namespace hsplat
