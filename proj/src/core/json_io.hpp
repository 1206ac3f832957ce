// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Structured-text codecs for cameras, head parameters and transforms.

#pragma once

#include "camera.hpp"
#include "head_model.hpp"
#include "math.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace hsplat {

using Json = nlohmann::json;

Json readJsonFile(const std::filesystem::path &path);
void writeJsonFile(const Json &j, const std::filesystem::path &path);

/// 16 numbers, row-major.
Json mat4ToJson(const Mat4 &m);
Mat4 mat4FromJson(const Json &j, const std::string &what);

Json rigidToJson(const RigidTransform &t);
RigidTransform rigidFromJson(const Json &j, const std::string &what);

Json cameraToJson(const CameraRig &camera);
CameraRig cameraFromJson(const Json &j);

/// Keys: shape, expression, pose (list of axis-angle triples),
/// global_rotation (9 numbers, row-major), global_translation.
Json paramsToJson(const HeadParams &params);

/// Overwrites only the keys present in `j`; dimensions are checked against
/// `model`.
void updateParamsFromJson(const Json &j, const HeadModel &model, HeadParams &params);

HeadParams paramsFromJson(const Json &j, const HeadModel &model);

/// Reads a number array, checking the length when `expected >= 0`.
std::vector<double> numberArray(const Json &j, const std::string &what, long expected = -1);

} // namespace hsplat
