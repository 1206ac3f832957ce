// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// headsplat: command-line front end over the C API.

#include "headsplat/headsplat.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using Json   = nlohmann::json;

namespace {

const char *kExitCodes = R"(Exit codes:
  0  success
  1  runtime failure (I/O, socket bind, hook subprocess)
  2  usage error (unknown flag, missing required flag, bad value)
  3  input parse error (missing or malformed input file)
  4  invariant violation in the inputs
  5  numerical failure (degenerate or non-finite computation))";

struct Failure {
    int code;
};

// Throws Failure after printing a one-line diagnostic.
void
check(hs_status status, const std::string &command) {
    if (status == HS_OK)
        return;
    std::cerr << "headsplat " << command << ": " << hs_status_name(status) << ": " << hs_last_error()
              << "\n";
    throw Failure{static_cast<int>(status)};
}

template <class T, void (*Free)(T *)>
struct Handle {
    T *ptr = nullptr;
    Handle() = default;
    Handle(const Handle &) = delete;
    Handle &operator=(const Handle &) = delete;
    ~Handle() {
        if (ptr)
            Free(ptr);
    }
    T **
    out() {
        return &ptr;
    }
    T *
    get() const {
        return ptr;
    }
};

using Config = Handle<hs_config, hs_config_free>;
using Scene  = Handle<hs_scene, hs_scene_free>;
using Frame  = Handle<hs_frame, hs_frame_free>;
using Server = Handle<hs_server, hs_server_free>;

struct Common {
    std::string config;
    std::optional<int> workers;
};

void
addCommon(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "Engine config file (JSON); absent keys take defaults")
        ->check(CLI::ExistingFile);
    cmd->add_option("--workers", c.workers, "Worker threads for rendering (0: all cores)")
        ->check(CLI::NonNegativeNumber);
}

void
loadConfig(const Common &c, const Json &overrides, Config &cfg, const std::string &command) {
    check(hs_config_load(c.config.empty() ? nullptr : c.config.c_str(), cfg.out()), command);
    Json patch = overrides;
    if (c.workers)
        patch["render"]["workers"] = *c.workers;
    if (!patch.empty())
        check(hs_config_merge_json(cfg.get(), patch.dump().c_str()), command);
}

void
writeResolved(const Config &cfg, const fs::path &dir, const std::string &command) {
    const fs::path target = (dir.empty() ? fs::path(".") : dir) / "resolved_config.json";
    check(hs_config_save(cfg.get(), target.string().c_str()), command);
}

fs::path
parentOf(const std::string &file) {
    return fs::path(file).parent_path();
}

volatile std::sig_atomic_t gStop = 0;

void
onSignal(int) {
    gStop = 1;
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"headsplat: animatable Gaussian-splat head engine"};
    app.footer(kExitCodes);
    app.set_help_flag();
    app.set_help_all_flag("-h,--help", "Print help for every command and exit");
    app.require_subcommand(1);
    app.set_version_flag("--version", hs_version());

    // render
    Common renderCommon;
    std::string renderScene, renderCamera = "cam0", renderOut, renderParams, renderDepth;
    auto *render = app.add_subcommand("render", "Render one still image of a scene");
    addCommon(render, renderCommon);
    render->add_option("--scene", renderScene, "Scene bundle directory or 'fixture'")->required();
    render->add_option("--camera", renderCamera, "Named camera of the scene")->capture_default_str();
    render->add_option("--out", renderOut, "Output PNG path")->required();
    render->add_option("--params", renderParams, "Head parameter JSON (partial update)")
        ->check(CLI::ExistingFile);
    render->add_option("--depth", renderDepth, "Also write the expected-depth raster here");

    // animate
    Common animCommon;
    std::string animScene, animTrack, animCamera = "cam0", animOut;
    auto *animate = app.add_subcommand("animate", "Render an animation track to a PNG sequence");
    addCommon(animate, animCommon);
    animate->add_option("--scene", animScene, "Scene bundle directory or 'fixture'")->required();
    animate->add_option("--track", animTrack, "Animation track JSON")->required();
    animate->add_option("--camera", animCamera, "Camera for frames without their own")
        ->capture_default_str();
    animate->add_option("--out-dir", animOut, "Output directory for frame_NNNNN.png")->required();

    // optimize
    Common optCommon;
    std::string optScene, optGuidance, optOut, optHook;
    std::optional<std::uint64_t> optSeed;
    std::optional<int> optIterations, optSnapshot;
    auto *optimize = app.add_subcommand("optimize", "Transfer appearance from guidance images");
    addCommon(optimize, optCommon);
    optimize->add_option("--scene", optScene, "Scene bundle directory or 'fixture'")->required();
    optimize->add_option("--guidance", optGuidance, "Guidance directory (images, masks, cameras, params)")
        ->required();
    optimize->add_option("--out-dir", optOut, "Output directory")->required();
    optimize->add_option("--seed", optSeed, "Seed for record sampling (mandatory)")->required();
    optimize->add_option("--iterations", optIterations, "Override optimizer.iterations")
        ->check(CLI::PositiveNumber);
    optimize->add_option("--snapshot-interval", optSnapshot,
                         "Write the head cloud every N iterations (0: never)")
        ->check(CLI::NonNegativeNumber);
    optimize->add_option("--hook", optHook, "External loss hook command");

    // align
    Common alignCommon;
    std::string alignProblem, alignOut;
    double alignTol = 1e-6;
    auto *align = app.add_subcommand("align", "Solve the head-to-background rigid transform");
    addCommon(align, alignCommon);
    align->add_option("--problem", alignProblem, "Alignment problem JSON")->required();
    align->add_option("--out", alignOut, "Output transform JSON")->required();
    align->add_option("--tolerance", alignTol, "Agreement tolerance across camera pairs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    // label-person
    Common labelCommon;
    std::string labelCloud, labelViews, labelOut;
    std::optional<double> labelTau, labelDepthTol;
    std::optional<int> labelMinViews, labelDilation;
    auto *label = app.add_subcommand("label-person", "Flag and remove person Gaussians by mask voting");
    addCommon(label, labelCommon);
    label->add_option("--cloud", labelCloud, "Background splat file")->required();
    label->add_option("--views", labelViews, "Directory with cameras.json and masks/<id>.png")->required();
    label->add_option("--out-dir", labelOut, "Output directory")->required();
    label->add_option("--tau", labelTau, "Inlier fraction threshold in (0, 1]");
    label->add_option("--min-views", labelMinViews, "Minimum visible views to flag");
    label->add_option("--depth-tolerance", labelDepthTol, "Occlusion depth tolerance (m)");
    label->add_option("--dilation", labelDilation, "Mask dilation radius (px)");

    // compose
    Common composeCommon;
    std::string composeScene, composeOut, composeBg, composeLabels, composeTransform, composeAsset;
    auto *compose = app.add_subcommand("compose", "Assemble a scene bundle from parts");
    addCommon(compose, composeCommon);
    compose->add_option("--scene", composeScene, "Base scene bundle directory or 'fixture'")->required();
    compose->add_option("--background", composeBg, "Background splat file");
    compose->add_option("--labels", composeLabels, "Label sidecar; flagged background points are dropped");
    compose->add_option("--transform", composeTransform, "Head transform JSON from 'align'");
    compose->add_option("--head-asset", composeAsset, "Head asset to bind with the binding config");
    compose->add_option("--out-dir", composeOut, "Output bundle directory")->required();

    // convert
    std::string convIn, convOut;
    bool convSynthetic = false;
    std::uint64_t convSeed = 0;
    int convVertices = 642, convJoints = 5, convShape = 6, convExpr = 8;
    auto *convert = app.add_subcommand(
        "convert", "Re-encode assets (.ply, .hsa, .raster -> .png, .png -> .raster) or create a synthetic head");
    convert->add_option("--in", convIn, "Input file");
    convert->add_option("--out", convOut, "Output file")->required();
    convert->add_flag("--synthetic-head", convSynthetic, "Write a synthetic head asset instead of converting");
    convert->add_option("--seed", convSeed, "Synthetic head seed")->capture_default_str();
    convert->add_option("--vertices", convVertices, "Synthetic head vertex count (10*4^s+2)")
        ->capture_default_str();
    convert->add_option("--joints", convJoints, "Synthetic head joint count")->capture_default_str();
    convert->add_option("--shape-dims", convShape, "Synthetic head shape dimensions")->capture_default_str();
    convert->add_option("--expression-dims", convExpr, "Synthetic head expression dimensions")
        ->capture_default_str();

    // serve
    Common serveCommon;
    std::string serveScene, serveBind = "127.0.0.1:8765", serveUi, serveCamera = "cam0", serveFormat;
    std::optional<double> serveFps;
    bool serveContinuous = false;
    double serveDuration = 0.0;
    auto *serve = app.add_subcommand("serve", "Run the live reenactment endpoint");
    addCommon(serve, serveCommon);
    serve->add_option("--scene", serveScene, "Scene bundle directory or 'fixture'")->required();
    serve->add_option("--bind", serveBind, "host:port to listen on (port 0 picks one)")->capture_default_str();
    serve->add_option("--fps-cap", serveFps, "Maximum frames per second")->check(CLI::PositiveNumber);
    serve->add_option("--format", serveFormat, "Frame format")->check(CLI::IsMember({"png", "rgba"}));
    serve->add_option("--ui", serveUi, "Directory of static UI files to serve over HTTP");
    serve->add_option("--camera", serveCamera, "Initial camera")->capture_default_str();
    serve->add_flag("--continuous", serveContinuous, "Render every tick even without updates");
    serve->add_option("--duration", serveDuration, "Stop after this many seconds (0: until SIGINT/SIGTERM)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);

    // selftest
    bool stQuick = false;
    int stWorkers = 0;
    auto *selftest = app.add_subcommand("selftest", "Run the built-in property checks");
    selftest->add_flag("--quick", stQuick, "Fewer random draws and a smaller benchmark");
    selftest->add_option("--workers", stWorkers, "Worker threads (0: all cores)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << "headsplat: usage error: " << e.what() << "\n";
        return HS_ERR_USAGE;
    }

    try {
        if (*render) {
            Config cfg;
            Scene scene;
            Frame frame;
            loadConfig(renderCommon, Json::object(), cfg, "render");
            check(hs_scene_load(renderScene.c_str(), scene.out()), "render");
            if (!renderParams.empty())
                check(hs_scene_set_params_file(scene.get(), renderParams.c_str()), "render");
            check(hs_render(scene.get(), cfg.get(), renderCamera.c_str(), frame.out()), "render");
            if (!parentOf(renderOut).empty())
                fs::create_directories(parentOf(renderOut));
            check(hs_frame_save_png(frame.get(), renderOut.c_str()), "render");
            if (!renderDepth.empty())
                check(hs_frame_save_depth(frame.get(), renderDepth.c_str()), "render");
            writeResolved(cfg, parentOf(renderOut), "render");
        } else if (*animate) {
            Config cfg;
            Scene scene;
            loadConfig(animCommon, Json::object(), cfg, "animate");
            check(hs_scene_load(animScene.c_str(), scene.out()), "animate");
            int frames = 0;
            check(hs_animate(scene.get(), cfg.get(), animTrack.c_str(), animCamera.c_str(), animOut.c_str(),
                             &frames),
                  "animate");
            writeResolved(cfg, animOut, "animate");
            std::cout << frames << " frames written to " << animOut << "\n";
        } else if (*optimize) {
            Json patch;
            patch["optimizer"]["seed"] = *optSeed;
            if (optIterations)
                patch["optimizer"]["iterations"] = *optIterations;
            if (optSnapshot)
                patch["optimizer"]["snapshot_interval"] = *optSnapshot;
            if (!optHook.empty())
                patch["optimizer"]["hook_command"] = optHook;
            Config cfg;
            Scene scene;
            loadConfig(optCommon, patch, cfg, "optimize");
            check(hs_scene_load(optScene.c_str(), scene.out()), "optimize");
            check(hs_optimize(scene.get(), cfg.get(), optGuidance.c_str(), optOut.c_str()), "optimize");
            writeResolved(cfg, optOut, "optimize");
        } else if (*align) {
            Config cfg;
            loadConfig(alignCommon, Json::object(), cfg, "align");
            if (!parentOf(alignOut).empty())
                fs::create_directories(parentOf(alignOut));
            check(hs_align(alignProblem.c_str(), alignOut.c_str(), alignTol), "align");
            writeResolved(cfg, parentOf(alignOut), "align");
        } else if (*label) {
            Json patch = Json::object();
            if (labelTau)
                patch["mask_vote"]["tau"] = *labelTau;
            if (labelMinViews)
                patch["mask_vote"]["min_views"] = *labelMinViews;
            if (labelDepthTol)
                patch["mask_vote"]["depth_tolerance"] = *labelDepthTol;
            if (labelDilation)
                patch["mask_vote"]["dilation_radius"] = *labelDilation;
            Config cfg;
            loadConfig(labelCommon, patch, cfg, "label-person");
            std::size_t flagged = 0;
            check(hs_label_person(cfg.get(), labelCloud.c_str(), labelViews.c_str(), labelOut.c_str(), &flagged),
                  "label-person");
            writeResolved(cfg, labelOut, "label-person");
            std::cout << flagged << " Gaussians flagged as person\n";
        } else if (*compose) {
            Config cfg;
            Scene scene;
            loadConfig(composeCommon, Json::object(), cfg, "compose");
            check(hs_scene_load(composeScene.c_str(), scene.out()), "compose");
            auto opt = [](const std::string &s) { return s.empty() ? nullptr : s.c_str(); };
            const hs_compose_inputs in{opt(composeBg), opt(composeLabels), opt(composeTransform),
                                       opt(composeAsset)};
            check(hs_compose(scene.get(), cfg.get(), &in, composeOut.c_str()), "compose");
            writeResolved(cfg, composeOut, "compose");
        } else if (*convert) {
            if (convSynthetic) {
                check(hs_make_synthetic_head(convSeed, convVertices, convJoints, convShape, convExpr,
                                             convOut.c_str()),
                      "convert");
            } else {
                if (convIn.empty()) {
                    std::cerr << "headsplat convert: usage error: --in is required unless --synthetic-head is given\n";
                    return HS_ERR_USAGE;
                }
                check(hs_convert(convIn.c_str(), convOut.c_str()), "convert");
            }
        } else if (*serve) {
            Json patch = Json::object();
            if (serveFps)
                patch["service"]["fps_cap"] = *serveFps;
            if (!serveFormat.empty())
                patch["service"]["format"] = serveFormat;
            Config cfg;
            Scene scene;
            Server server;
            loadConfig(serveCommon, patch, cfg, "serve");
            check(hs_scene_load(serveScene.c_str(), scene.out()), "serve");
            std::signal(SIGINT, onSignal);
            std::signal(SIGTERM, onSignal);
            const hs_server_options so{serveBind.c_str(), serveUi.empty() ? nullptr : serveUi.c_str(),
                                       serveCamera.c_str(), serveContinuous ? 1 : 0};
            check(hs_server_start(scene.get(), cfg.get(), &so, server.out()), "serve");
            std::cout << "listening on port " << hs_server_port(server.get()) << std::endl;
            const std::timespec tick{0, 50'000'000};
            double waited = 0.0;
            while (!gStop && (serveDuration <= 0.0 || waited < serveDuration)) {
                nanosleep(&tick, nullptr);
                waited += 0.05;
            }
            char *stats = nullptr;
            if (hs_server_stats_json(server.get(), &stats) == HS_OK) {
                std::cout << Json::parse(stats).dump() << std::endl;
                hs_string_free(stats);
            }
            hs_server_stop(server.get());
        } else if (*selftest) {
            int failures = 0;
            auto report  = [](const char *name, int passed, const char *detail, void *) {
                std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
                std::fflush(stdout);
            };
            check(hs_selftest(stQuick ? 1 : 0, stWorkers, report, nullptr, &failures), "selftest");
            std::printf("%s\n", failures == 0 ? "all properties passed"
                                              : (std::to_string(failures) + " properties failed").c_str());
            return failures == 0 ? 0 : HS_ERR_NUMERICAL;
        }
    } catch (const Failure &f) {
        return f.code;
    } catch (const std::exception &e) {
        std::cerr << "headsplat: runtime error: " << e.what() << "\n";
        return HS_ERR_RUNTIME;
    }
    return 0;
}
