// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "headsplat/headsplat.h"

#include "alignment.hpp"
#include "config.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "json_io.hpp"
#include "optimizer.hpp"
#include "rasterizer.hpp"
#include "scene_bundle.hpp"
#include "scene_tools.hpp"
#include "selftest.hpp"
#include "session.hpp"
#include "ws_server.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

namespace fs = std::filesystem;
using namespace hsplat;

struct hs_config {
    EngineConfig value;
};

struct hs_scene {
    SceneBundle value;
};

struct hs_frame {
    RenderOutput value;
};

struct hs_server {
    std::shared_ptr<const SceneBundle> scene;
    std::unique_ptr<Session> session;
    std::unique_ptr<WebSocketServer> server;
    bool running = false;
};

namespace {

thread_local std::string tLastError;

hs_status
fail(hs_status status, const std::string &message) {
    tLastError = message;
    return status;
}

template <class F>
hs_status
guard(F &&body) noexcept {
    try {
        body();
        return HS_OK;
    } catch (const Error &e) {
        return fail(static_cast<hs_status>(e.kind()), e.what());
    } catch (const nlohmann::json::exception &e) {
        return fail(HS_ERR_PARSE, e.what());
    } catch (const std::bad_alloc &) {
        return fail(HS_ERR_RUNTIME, "out of memory");
    } catch (const std::exception &e) {
        return fail(HS_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(HS_ERR_RUNTIME, "unknown error");
    }
}

void
require(const void *p, const char *what) {
    if (!p)
        throw Error(ErrorKind::kUsage, std::string(what) + " must not be null");
}

std::string
text(const char *s, const char *what) {
    require(s, what);
    return s;
}

char *
dupString(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

fs::path
ensureDir(const char *dir) {
    const fs::path p = text(dir, "output directory");
    fs::create_directories(p);
    return p;
}

std::string
extension(const fs::path &p) {
    std::string e = p.extension().string();
    for (char &c : e)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return e;
}

} // namespace

extern "C" {

const char *
hs_version(void) {
    return "0.1.0";
}

const char *
hs_last_error(void) {
    return tLastError.c_str();
}

const char *
hs_status_name(hs_status status) {
    switch (status) {
    case HS_OK:
        return "ok";
    case HS_ERR_RUNTIME:
        return "runtime error";
    case HS_ERR_USAGE:
        return "usage error";
    case HS_ERR_PARSE:
        return "input parse error";
    case HS_ERR_INVALID:
        return "invariant violation";
    case HS_ERR_NUMERICAL:
        return "numerical failure";
    }
    return "unknown status";
}

void
hs_string_free(char *s) {
    std::free(s);
}

// ---------------------------------------------------------------------------

hs_status
hs_config_load(const char *path, hs_config **out) {
    return guard([&] {
        require(out, "out");
        *out = new hs_config{loadConfigOrDefault(path ? path : "")};
    });
}

hs_status
hs_config_merge_json(hs_config *config, const char *json) {
    return guard([&] {
        require(config, "config");
        Json merged = configToJson(config->value);
        merged.merge_patch(Json::parse(text(json, "json")));
        config->value = configFromJson(merged);
    });
}

hs_status
hs_config_to_json(const hs_config *config, char **out) {
    return guard([&] {
        require(config, "config");
        require(out, "out");
        *out = dupString(configToJson(config->value).dump(2));
    });
}

hs_status
hs_config_save(const hs_config *config, const char *path) {
    return guard([&] {
        require(config, "config");
        saveResolvedConfig(config->value, text(path, "path"));
    });
}

void
hs_config_free(hs_config *config) {
    delete config;
}

// ---------------------------------------------------------------------------

hs_status
hs_scene_load(const char *spec, hs_scene **out) {
    return guard([&] {
        require(out, "out");
        *out = new hs_scene{resolveScene(text(spec, "scene"))};
    });
}

hs_status
hs_scene_save(const hs_scene *scene, const char *dir) {
    return guard([&] {
        require(scene, "scene");
        saveSceneBundle(scene->value, text(dir, "dir"));
    });
}

hs_status
hs_scene_set_params_json(hs_scene *scene, const char *json) {
    return guard([&] {
        require(scene, "scene");
        HeadParams p = scene->value.params;
        updateParamsFromJson(Json::parse(text(json, "json")), *scene->value.model, p);
        scene->value.params = std::move(p);
    });
}

hs_status
hs_scene_set_params_file(hs_scene *scene, const char *path) {
    return guard([&] {
        require(scene, "scene");
        HeadParams p = scene->value.params;
        updateParamsFromJson(readJsonFile(text(path, "path")), *scene->value.model, p);
        scene->value.params = std::move(p);
    });
}

hs_status
hs_scene_info_json(const hs_scene *scene, char **out) {
    return guard([&] {
        require(scene, "scene");
        require(out, "out");
        Json cams = Json::array();
        for (const auto &[name, cam] : scene->value.cameras)
            cams.push_back(name);
        const Json info{{"head_gaussians", scene->value.head.size()},
                        {"background_gaussians", scene->value.background.size()},
                        {"cameras", cams},
                        {"params", paramsToJson(scene->value.params)}};
        *out = dupString(info.dump(2));
    });
}

void
hs_scene_free(hs_scene *scene) {
    delete scene;
}

// ---------------------------------------------------------------------------

hs_status
hs_render(const hs_scene *scene, const hs_config *config, const char *camera, hs_frame **out) {
    return guard([&] {
        require(scene, "scene");
        require(config, "config");
        require(out, "out");
        const CameraRig &cam = scene->value.camera(text(camera, "camera"));
        *out = new hs_frame{render(composeScene(scene->value), cam, config->value.render)};
    });
}

int
hs_frame_width(const hs_frame *frame) {
    return frame ? frame->value.color.width : 0;
}

int
hs_frame_height(const hs_frame *frame) {
    return frame ? frame->value.color.height : 0;
}

hs_status
hs_frame_read_rgba(const hs_frame *frame, float *dst, size_t count) {
    return guard([&] {
        require(frame, "frame");
        require(dst, "dst");
        const Image &c = frame->value.color;
        const Image &a = frame->value.alpha;
        if (count < c.pixelCount() * 4)
            throw Error(ErrorKind::kUsage, "destination holds fewer than width*height*4 floats");
        for (std::size_t i = 0; i < c.pixelCount(); ++i) {
            for (int k = 0; k < 3; ++k)
                dst[4 * i + static_cast<std::size_t>(k)] = static_cast<float>(c.data[3 * i + static_cast<std::size_t>(k)]);
            dst[4 * i + 3] = static_cast<float>(a.data[i]);
        }
    });
}

hs_status
hs_frame_save_png(const hs_frame *frame, const char *path) {
    return guard([&] {
        require(frame, "frame");
        savePng(frame->value.color, text(path, "path"));
    });
}

hs_status
hs_frame_save_depth(const hs_frame *frame, const char *path) {
    return guard([&] {
        require(frame, "frame");
        saveRaster(frame->value.depth, text(path, "path"));
    });
}

void
hs_frame_free(hs_frame *frame) {
    delete frame;
}

hs_status
hs_animate(const hs_scene *scene, const hs_config *config, const char *track_path, const char *camera,
           const char *out_dir, int *frames_written) {
    return guard([&] {
        require(scene, "scene");
        require(config, "config");
        const SceneBundle &s       = scene->value;
        const AnimationTrack track = loadAnimationTrack(text(track_path, "track"), *s.model);
        const CameraRig &base      = s.camera(text(camera, "camera"));
        const fs::path dir         = ensureDir(out_dir);
        int n                      = 0;
        for (const TrackFrame &f : track) {
            const CameraRig &cam   = f.camera ? *f.camera : base;
            const RenderOutput out = render(composeScene(s, f.params), cam, config->value.render);
            char name[32];
            std::snprintf(name, sizeof name, "frame_%05d.png", n);
            savePng(out.color, dir / name);
            ++n;
        }
        if (frames_written)
            *frames_written = n;
    });
}

// ---------------------------------------------------------------------------

hs_status
hs_optimize(const hs_scene *scene, const hs_config *config, const char *guidance_dir,
            const char *out_dir) {
    return guard([&] {
        require(scene, "scene");
        require(config, "config");
        const SceneBundle &s       = scene->value;
        const GuidanceSet guidance = loadGuidance(text(guidance_dir, "guidance"), *s.model);
        const fs::path dir         = ensureDir(out_dir);
        SnapshotFn snapshot;
        if (config->value.optimizer.snapshotInterval > 0) {
            fs::create_directories(dir / "snapshots");
            snapshot = [&](int iteration, const GaussianCloud &cloud) {
                char name[32];
                std::snprintf(name, sizeof name, "head_%06d.ply", iteration);
                saveSplatFile(cloud, dir / "snapshots" / name);
            };
        }
        OptimResult result = optimizeAppearance(*s.model, s.binding, s.head, guidance,
                                                config->value.optimizer, config->value.render, snapshot);
        SceneBundle updated = s;
        updated.head        = std::move(result.cloud);
        saveSceneBundle(updated, dir / "scene");
        writeLossCsv(result.history, dir / "loss.csv");
    });
}

hs_status
hs_align(const char *problem_path, const char *out_path, double tolerance) {
    return guard([&] {
        const AlignmentProblem problem = loadAlignmentProblem(text(problem_path, "problem"));
        saveAlignmentResult(solveAlignment(problem, tolerance), text(out_path, "out"));
    });
}

hs_status
hs_label_person(const hs_config *config, const char *splat_path, const char *views_dir,
                const char *out_dir, size_t *flagged) {
    return guard([&] {
        require(config, "config");
        GaussianCloud cloud = loadSplatFile(text(splat_path, "splat"));
        const auto views    = loadLabelViews(text(views_dir, "views"));
        const fs::path dir  = ensureDir(out_dir);
        const auto flags =
            labelPersonGaussians(cloud, views, config->value.maskVote, config->value.render);
        cloud.personFlags = flags;
        saveLabels(cloud, dir / "labels.csv");
        saveSplatFile(removeFlagged(cloud, flags), dir / "cleaned.ply");
        writeRemovalReport(removalReport(cloud, flags, views, config->value.render),
                           dir / "removal_report.csv");
        if (flagged) {
            std::size_t n = 0;
            for (auto f : flags)
                n += f ? 1 : 0;
            *flagged = n;
        }
    });
}

hs_status
hs_compose(const hs_scene *scene, const hs_config *config, const hs_compose_inputs *inputs,
           const char *out_dir) {
    return guard([&] {
        require(scene, "scene");
        require(config, "config");
        require(inputs, "inputs");
        SceneBundle s = scene->value;
        if (inputs->head_asset) {
            auto model              = std::make_shared<HeadModel>(loadHeadAsset(inputs->head_asset));
            const HeadParams neutral = HeadParams::neutral(*model);
            BindResult bound = bindToMesh(poseHead(*model, neutral),
                                          config->value.binding.gaussiansPerTriangle,
                                          config->value.binding.k);
            for (std::size_t i = 0; i < bound.cloud.size(); ++i) {
                bound.cloud.sh[i]            = ShCoefficients{};
                bound.cloud.opacityLogits[i] = logit(0.85);
                bound.cloud.groups[i]        = Group::kHead;
            }
            s.model   = std::move(model);
            s.binding = std::move(bound.binding);
            s.head    = std::move(bound.cloud);
            s.params  = neutral;
        }
        if (inputs->background)
            s.background = loadSplatFile(inputs->background, Group::kBackground);
        if (inputs->labels) {
            loadLabels(s.background, inputs->labels);
            s.background = removeFlagged(s.background, s.background.personFlags);
        }
        if (inputs->transform) {
            const Json j    = readJsonFile(inputs->transform);
            s.headTransform = rigidFromJson(j.at("transform"), "transform");
        }
        s.validate();
        saveSceneBundle(s, text(out_dir, "out"));
    });
}

hs_status
hs_convert(const char *in_path, const char *out_path) {
    return guard([&] {
        const fs::path in  = text(in_path, "in");
        const fs::path out = text(out_path, "out");
        const std::string a = extension(in), b = extension(out);
        if (a == ".ply" && b == ".ply") {
            saveSplatFile(loadSplatFile(in), out);
        } else if (a == ".hsa" && b == ".hsa") {
            saveHeadAsset(loadHeadAsset(in), out);
        } else if (a == ".raster" && b == ".png") {
            Image img = loadRaster(in);
            if (img.channels != 1 && img.channels != 3 && img.channels != 4)
                throwInvalid("convert: raster must have 1, 3 or 4 channels for PNG output");
            double lo = 0.0, hi = 0.0;
            bool any  = false;
            for (double v : img.data) {
                if (!std::isfinite(v))
                    continue;
                lo  = any ? std::min(lo, v) : v;
                hi  = any ? std::max(hi, v) : v;
                any = true;
            }
            const double span = hi > lo ? hi - lo : 1.0;
            for (double &v : img.data)
                v = std::isfinite(v) ? (v - lo) / span : 0.0;
            savePng(img, out);
        } else if (a == ".png" && b == ".raster") {
            saveRaster(loadPng(in, 3), out);
        } else {
            throw Error(ErrorKind::kUsage, "convert: unsupported conversion " + a + " -> " + b);
        }
    });
}

hs_status
hs_make_synthetic_head(uint64_t seed, int vertices, int joints, int shape_dims, int expression_dims,
                       const char *out_path) {
    return guard([&] {
        saveHeadAsset(makeSyntheticHead(seed, vertices, joints, shape_dims, expression_dims),
                      text(out_path, "out"));
    });
}

// ---------------------------------------------------------------------------

hs_status
hs_server_start(const hs_scene *scene, const hs_config *config, const hs_server_options *options,
                hs_server **out) {
    return guard([&] {
        require(scene, "scene");
        require(config, "config");
        require(options, "options");
        require(out, "out");
        const EngineConfig &cfg = config->value;
        auto srv                = std::make_unique<hs_server>();
        srv->scene              = std::make_shared<const SceneBundle>(scene->value);

        SessionOptions so;
        so.render     = cfg.render;
        so.camera     = options->camera ? options->camera : "cam0";
        so.format     = frameFormatFromName(cfg.service.format);
        so.fpsCap     = cfg.service.fpsCap;
        so.continuous = options->continuous != 0;
        srv->scene->camera(so.camera);

        ServerOptions wo = parseBindAddress(options->bind ? options->bind : "127.0.0.1:8765");
        if (options->ui_dir) {
            wo.uiDir = options->ui_dir;
            if (!fs::is_directory(wo.uiDir))
                throw Error(ErrorKind::kUsage, "--ui directory '" + wo.uiDir.string() + "' does not exist");
        }
        wo.queueDepth = cfg.service.queueDepth;

        srv->session = std::make_unique<Session>(srv->scene, so);
        srv->server  = std::make_unique<WebSocketServer>(*srv->session, wo);
        srv->server->start();
        srv->session->start();
        srv->running = true;
        *out         = srv.release();
    });
}

int
hs_server_port(const hs_server *server) {
    return server && server->server ? server->server->port() : 0;
}

hs_status
hs_server_stats_json(const hs_server *server, char **out) {
    return guard([&] {
        require(server, "server");
        require(out, "out");
        *out = dupString(server->session->handleMessage(R"({"type":"get_stats"})"));
    });
}

void
hs_server_stop(hs_server *server) {
    if (!server || !server->running)
        return;
    server->server->stop();
    server->session->stop();
    server->running = false;
}

void
hs_server_free(hs_server *server) {
    hs_server_stop(server);
    delete server;
}

// ---------------------------------------------------------------------------

hs_status
hs_selftest(int quick, int workers, hs_selftest_callback callback, void *user, int *failures) {
    return guard([&] {
        SelftestOptions opt;
        opt.quick   = quick != 0;
        opt.workers = workers;
        int failed  = 0;
        runSelftest(opt, [&](const SelftestResult &r) {
            failed += r.passed ? 0 : 1;
            if (callback)
                callback(r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), user);
        });
        if (failures)
            *failures = failed;
    });
}

} // extern "C"
