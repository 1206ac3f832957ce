// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include "error.hpp"

#include <set>

namespace hsplat {

namespace {

// Reads keys from one config section, tracking which were consumed.
class Section {
  public:
    Section(const Json &root, const std::string &name) : mName(name) {
        if (root.contains(name)) {
            mJson = root.at(name);
            if (!mJson.is_object())
                throwParse("config: section '" + name + "' must be an object");
        }
    }

    template <typename T>
    void
    read(const std::string &key, T &value) {
        mSeen.insert(key);
        if (!mJson.contains(key))
            return;
        try {
            value = mJson.at(key).get<T>();
        } catch (const Json::exception &) {
            throwParse("config: " + mName + "." + key + " has the wrong type");
        }
    }

    void
    readVec3(const std::string &key, Vec3 &value) {
        mSeen.insert(key);
        if (!mJson.contains(key))
            return;
        const auto v = numberArray(mJson.at(key), "config: " + mName + "." + key, 3);
        value        = Vec3(v[0], v[1], v[2]);
    }

    void
    finish() const {
        if (mJson.is_null())
            return;
        for (const auto &item : mJson.items())
            if (!mSeen.count(item.key()))
                throwParse("config: unknown key " + mName + "." + item.key());
    }

  private:
    std::string mName;
    Json mJson;
    std::set<std::string> mSeen;
};

const char *
maskModeName(MaskMode m) {
    return m == MaskMode::kPerView ? "per_view" : "all_head";
}

} // namespace

void
EngineConfig::validate() const {
    render.validate();
    optimizer.validate();
    maskVote.validate();
    HS_CHECK_INPUT(binding.gaussiansPerTriangle > 0, "config: gaussians_per_triangle must be positive");
    HS_CHECK_INPUT(binding.k > 0.0, "config: binding k must be positive");
    HS_CHECK_INPUT(service.fpsCap > 0.0, "config: fps_cap must be positive");
    HS_CHECK_INPUT(service.format == "png" || service.format == "rgba",
                   "config: service format must be png or rgba");
    HS_CHECK_INPUT(service.queueDepth > 0, "config: queue_depth must be positive");
}

EngineConfig
configFromJson(const Json &j) {
    if (!j.is_object())
        throwParse("config: expected an object");
    static const std::set<std::string> sections{"render", "optimizer", "mask_vote", "binding", "service"};
    for (const auto &item : j.items())
        if (!sections.count(item.key()))
            throwParse("config: unknown section '" + item.key() + "'");

    EngineConfig c;
    {
        Section s(j, "render");
        RenderOptions &r = c.render;
        s.read("tile_size", r.tileSize);
        s.read("low_pass_dilation", r.lowPassDilation);
        s.read("alpha_max", r.alphaMax);
        s.read("alpha_cull", r.alphaCull);
        s.read("transmittance_stop", r.transmittanceStop);
        s.read("frustum_margin", r.frustumMargin);
        s.readVec3("background", r.background);
        s.read("workers", r.workers);
        s.finish();
    }
    {
        Section s(j, "optimizer");
        OptimConfig &o = c.optimizer;
        s.read("lr_sh_dc", o.lrShDc);
        s.read("lr_sh_rest", o.lrShRest);
        s.read("lr_opacity", o.lrOpacity);
        s.read("lr_reduction_factor", o.lrReduction);
        s.read("final_lr_fraction", o.finalLrFraction);
        s.read("iterations", o.iterations);
        s.read("w_l1", o.weights.l1);
        s.read("w_ssim", o.weights.ssim);
        s.read("w_hook", o.weights.hook);
        s.read("reg_lambda", o.regLambda);
        s.read("rho", o.rho);
        std::string mode = maskModeName(o.maskMode);
        s.read("mask_mode", mode);
        if (mode == "per_view")
            o.maskMode = MaskMode::kPerView;
        else if (mode == "all_head")
            o.maskMode = MaskMode::kAllHead;
        else
            throwParse("config: optimizer.mask_mode must be per_view or all_head");
        s.read("snapshot_interval", o.snapshotInterval);
        s.read("seed", o.seed);
        s.read("adam_beta1", o.adamBeta1);
        s.read("adam_beta2", o.adamBeta2);
        s.read("adam_eps", o.adamEps);
        s.read("hook_command", o.hook.command);
        s.finish();
    }
    {
        Section s(j, "mask_vote");
        s.read("tau", c.maskVote.tau);
        s.read("min_views", c.maskVote.minViews);
        s.read("depth_tolerance", c.maskVote.depthTolerance);
        s.read("dilation_radius", c.maskVote.dilationRadius);
        s.finish();
    }
    {
        Section s(j, "binding");
        s.read("gaussians_per_triangle", c.binding.gaussiansPerTriangle);
        s.read("k", c.binding.k);
        s.finish();
    }
    {
        Section s(j, "service");
        s.read("fps_cap", c.service.fpsCap);
        s.read("format", c.service.format);
        s.read("queue_depth", c.service.queueDepth);
        s.finish();
    }
    c.validate();
    return c;
}

Json
configToJson(const EngineConfig &c) {
    const RenderOptions &r = c.render;
    const OptimConfig &o   = c.optimizer;
    return Json{
        {"render",
         {{"tile_size", r.tileSize},
          {"low_pass_dilation", r.lowPassDilation},
          {"alpha_max", r.alphaMax},
          {"alpha_cull", r.alphaCull},
          {"transmittance_stop", r.transmittanceStop},
          {"frustum_margin", r.frustumMargin},
          {"background", {r.background.x(), r.background.y(), r.background.z()}},
          {"workers", r.workers}}},
        {"optimizer",
         {{"lr_sh_dc", o.lrShDc},
          {"lr_sh_rest", o.lrShRest},
          {"lr_opacity", o.lrOpacity},
          {"lr_reduction_factor", o.lrReduction},
          {"final_lr_fraction", o.finalLrFraction},
          {"iterations", o.iterations},
          {"w_l1", o.weights.l1},
          {"w_ssim", o.weights.ssim},
          {"w_hook", o.weights.hook},
          {"reg_lambda", o.regLambda},
          {"rho", o.rho},
          {"mask_mode", maskModeName(o.maskMode)},
          {"snapshot_interval", o.snapshotInterval},
          {"seed", o.seed},
          {"adam_beta1", o.adamBeta1},
          {"adam_beta2", o.adamBeta2},
          {"adam_eps", o.adamEps},
          {"hook_command", o.hook.command}}},
        {"mask_vote",
         {{"tau", c.maskVote.tau},
          {"min_views", c.maskVote.minViews},
          {"depth_tolerance", c.maskVote.depthTolerance},
          {"dilation_radius", c.maskVote.dilationRadius}}},
        {"binding", {{"gaussians_per_triangle", c.binding.gaussiansPerTriangle}, {"k", c.binding.k}}},
        {"service",
         {{"fps_cap", c.service.fpsCap},
          {"format", c.service.format},
          {"queue_depth", c.service.queueDepth}}},
    };
}

EngineConfig
loadConfig(const std::filesystem::path &path) {
    try {
        return configFromJson(readJsonFile(path));
    } catch (const Error &e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

EngineConfig
loadConfigOrDefault(const std::filesystem::path &path) {
    return path.empty() ? EngineConfig{} : loadConfig(path);
}

void
saveResolvedConfig(const EngineConfig &config, const std::filesystem::path &path) {
    writeJsonFile(configToJson(config), path);
}

} // namespace hsplat
