// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Engine configuration: every tunable with its default, loaded from a
// structured-text file where absent keys take the defaults.

#pragma once

#include "json_io.hpp"
#include "optimizer.hpp"
#include "rasterizer.hpp"
#include "scene_tools.hpp"

#include <filesystem>
#include <string>

namespace hsplat {

struct BindingConfig {
    int gaussiansPerTriangle = 1;
    double k                 = 1.0;
};

struct ServiceConfig {
    double fpsCap      = 30.0;
    std::string format = "png"; // png | rgba
    int queueDepth     = 2;     // frames buffered per client before dropping
};

struct EngineConfig {
    RenderOptions render;
    OptimConfig optimizer;
    MaskVoteConfig maskVote;
    BindingConfig binding;
    ServiceConfig service;

    void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
EngineConfig configFromJson(const Json &j);
Json configToJson(const EngineConfig &config);

EngineConfig loadConfig(const std::filesystem::path &path);
/// Defaults when `path` is empty.
EngineConfig loadConfigOrDefault(const std::filesystem::path &path);
void saveResolvedConfig(const EngineConfig &config, const std::filesystem::path &path);

} // namespace hsplat
