// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "session.hpp"

#include "error.hpp"

#include <algorithm>
#include <numeric>

namespace hsplat {

AnimationTrack
loadAnimationTrack(const std::filesystem::path &path, const HeadModel &model) {
    const Json j = readJsonFile(path);
    if (!j.is_object() || !j.contains("frames") || !j["frames"].is_array())
        throwParse(path.string() + ": expected {\"frames\": [...]}");
    AnimationTrack track;
    for (const Json &f : j["frames"]) {
        if (!f.is_object() || !f.contains("time") || !f["time"].is_number())
            throwParse(path.string() + ": every frame needs a numeric 'time'");
        TrackFrame frame;
        frame.time   = f["time"].get<double>();
        frame.params = paramsFromJson(f.value("params", Json::object()), model);
        if (f.contains("camera"))
            frame.camera = cameraFromJson(f["camera"]);
        if (!track.empty() && !(frame.time > track.back().time))
            throwInvalid(path.string() + ": frame times must strictly increase");
        track.push_back(std::move(frame));
    }
    return track;
}

void
saveAnimationTrack(const AnimationTrack &track, const std::filesystem::path &path) {
    Json frames = Json::array();
    for (const auto &f : track) {
        Json o{{"time", f.time}, {"params", paramsToJson(f.params)}};
        if (f.camera)
            o["camera"] = cameraToJson(*f.camera);
        frames.push_back(o);
    }
    writeJsonFile(Json{{"frames", frames}}, path);
}

Session::Session(std::shared_ptr<const SceneBundle> scene, SessionOptions options)
    : mScene(std::move(scene)), mOptions(std::move(options)) {
    HS_CHECK_INPUT(mScene != nullptr, "session: scene is null");
    HS_CHECK_INPUT(mOptions.fpsCap > 0.0, "session: fps cap must be positive");
    mOptions.render.validate();
    mPending.params = mScene->params;
    mPending.camera = mScene->camera(mOptions.camera);
}

Session::~Session() {
    stop();
}

void
Session::attach(const std::shared_ptr<FrameSink> &sink) {
    std::lock_guard lock(mMutex);
    mSinks.push_back(sink);
}

void
Session::detach(const FrameSink *sink) {
    std::lock_guard lock(mMutex);
    std::erase_if(mSinks, [&](const std::weak_ptr<FrameSink> &w) {
        const auto s = w.lock();
        return !s || s.get() == sink;
    });
}

void
Session::swapScene(std::shared_ptr<const SceneBundle> scene) {
    HS_CHECK_INPUT(scene != nullptr, "session: scene is null");
    std::lock_guard lock(mMutex);
    mScene           = std::move(scene);
    mPending.params  = mScene->params;
    mPending.camera  = mScene->camera(mOptions.camera);
    mPending.dirty   = true;
    mWake.notify_all();
}

Json
Session::ranges() const {
    std::lock_guard lock(mMutex);
    const HeadModel &m = *mScene->model;
    Json cams          = Json::array();
    for (const auto &[name, cam] : mScene->cameras)
        cams.push_back(name);
    const CameraRig &cam = mPending.camera;
    return Json{{"type", "ranges"},
                {"shape", {{"count", m.shapeDims()}, {"min", -3.0}, {"max", 3.0}}},
                {"expression", {{"count", m.expressionDims()}, {"min", -3.0}, {"max", 3.0}}},
                {"pose", {{"joints", m.jointCount()}, {"min", -0.5}, {"max", 0.5}}},
                {"cameras", cams},
                {"camera", cameraToJson(cam)},
                {"format", frameFormatName(mOptions.format)},
                {"fps_cap", mOptions.fpsCap}};
}

std::string
Session::handleMessage(const std::string &text) {
    try {
        Json msg;
        try {
            msg = Json::parse(text);
        } catch (const Json::exception &e) {
            throwParse(std::string("malformed message: ") + e.what());
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
            throwParse("message needs a string 'type'");
        return dispatch(msg).dump();
    } catch (const Error &e) {
        return Json{{"type", "error"}, {"message", e.what()}}.dump();
    } catch (const Json::exception &e) {
        return Json{{"type", "error"}, {"message", e.what()}}.dump();
    }
}

Json
Session::dispatch(const Json &msg) {
    const std::string type = msg["type"].get<std::string>();
    if (type == "set_params") {
        std::lock_guard lock(mMutex);
        HeadParams params = mPending.params;
        updateParamsFromJson(msg, *mScene->model, params);
        CameraRig camera = mPending.camera;
        if (msg.contains("camera"))
            camera = cameraFromJson(msg["camera"]);
        if (msg.contains("camera_name"))
            camera = mScene->camera(msg["camera_name"].get<std::string>());
        mPending.params = std::move(params);
        mPending.camera = camera;
        mPending.dirty  = true;
        mWake.notify_all();
        return {{"type", "ok"}, {"command", type}};
    }
    if (type == "play_track") {
        if (!msg.contains("path") || !msg["path"].is_string())
            throwParse("play_track needs a string 'path'");
        std::shared_ptr<const SceneBundle> scene;
        {
            std::lock_guard lock(mMutex);
            scene = mScene;
        }
        AnimationTrack track = loadAnimationTrack(msg["path"].get<std::string>(), *scene->model);
        std::lock_guard lock(mMutex);
        const std::size_t count = track.size();
        for (auto &f : track)
            mTrack.push_back(std::move(f));
        mTrackStarted = false;
        mWake.notify_all();
        return {{"type", "track_queued"}, {"frames", count}};
    }
    if (type == "get_stats") {
        const SessionStats s = stats();
        return {{"type", "stats"},
                {"frames_rendered", s.framesRendered},
                {"frames_dropped", s.framesDropped},
                {"mean_frame_ms", s.meanFrameMs},
                {"p95_frame_ms", s.p95FrameMs},
                {"fps", s.fps}};
    }
    if (type == "set_format") {
        if (!msg.contains("format") || !msg["format"].is_string())
            throwParse("set_format needs a string 'format'");
        const FrameFormat f = frameFormatFromName(msg["format"].get<std::string>());
        std::lock_guard lock(mMutex);
        mOptions.format = f;
        return {{"type", "ok"}, {"command", type}};
    }
    if (type == "get_ranges")
        return ranges();
    throwParse("unknown message type '" + type + "'");
}

bool
Session::renderOne(const HeadParams &params, const CameraRig &camera) {
    std::shared_ptr<const SceneBundle> scene;
    RenderOptions renderOptions;
    FrameFormat format;
    std::uint32_t id;
    {
        std::lock_guard lock(mMutex);
        scene         = mScene;
        renderOptions = mOptions.render;
        format        = mOptions.format;
        id            = mNextFrameId++;
    }
    const auto t0 = std::chrono::steady_clock::now();
    RenderOutput out = render(composeScene(*scene, params), camera, renderOptions);
    auto bytes = std::make_shared<const std::vector<std::uint8_t>>(
        encodeFrame(out.color, out.alpha, id, format));
    const auto t1 = std::chrono::steady_clock::now();

    std::vector<std::shared_ptr<FrameSink>> sinks;
    {
        std::lock_guard lock(mMutex);
        if (!mFirstFrame)
            mFirstFrame = t0;
        mFrameMs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (mFrameMs.size() > 4096)
            mFrameMs.erase(mFrameMs.begin(), mFrameMs.begin() + 2048);
        mLast = {id, std::move(out), params};
        for (const auto &w : mSinks)
            if (auto s = w.lock())
                sinks.push_back(std::move(s));
    }
    std::uint64_t dropped = 0;
    for (const auto &s : sinks)
        dropped += !s->offerFrame(bytes);
    std::lock_guard lock(mMutex);
    mDropped += dropped;
    return true;
}

bool
Session::step() {
    HeadParams params;
    CameraRig camera;
    {
        std::lock_guard lock(mMutex);
        if (!mTrack.empty()) {
            TrackFrame f = std::move(mTrack.front());
            mTrack.pop_front();
            mPending.params = f.params;
            if (f.camera)
                mPending.camera = *f.camera;
            mPending.dirty = false;
            params         = mPending.params;
            camera         = mPending.camera;
        } else if (mPending.dirty || mOptions.continuous) {
            mPending.dirty = false;
            params         = mPending.params;
            camera         = mPending.camera;
        } else {
            return false;
        }
    }
    return renderOne(params, camera);
}

void
Session::loop() {
    using clock = std::chrono::steady_clock;
    auto next   = clock::now();
    for (;;) {
        {
            std::unique_lock lock(mMutex);
            mWake.wait(lock, [&] {
                return mStop || mPending.dirty || !mTrack.empty() || mOptions.continuous;
            });
            if (mStop)
                return;
            // Track frames honor their timestamps relative to the first one.
            if (!mTrack.empty()) {
                if (!mTrackStarted) {
                    mTrackStart   = clock::now() - std::chrono::duration_cast<clock::duration>(
                                                      std::chrono::duration<double>(mTrack.front().time));
                    mTrackStarted = true;
                }
                const auto due = mTrackStart + std::chrono::duration_cast<clock::duration>(
                                                   std::chrono::duration<double>(mTrack.front().time));
                if (mWake.wait_until(lock, due, [&] { return mStop; }))
                    return;
            }
        }
        const auto now = clock::now();
        if (now < next)
            std::this_thread::sleep_until(next);
        next = std::max(now, next) + std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>(1.0 / mOptions.fpsCap));
        step();
        {
            std::lock_guard lock(mMutex);
            if (mTrack.empty())
                mTrackStarted = false;
        }
    }
}

void
Session::start() {
    std::lock_guard lock(mMutex);
    if (mThread.joinable())
        return;
    mStop   = false;
    mThread = std::thread([this] { loop(); });
}

void
Session::stop() {
    {
        std::lock_guard lock(mMutex);
        mStop = true;
        mWake.notify_all();
    }
    if (mThread.joinable())
        mThread.join();
}

SessionStats
Session::stats() const {
    std::lock_guard lock(mMutex);
    SessionStats s;
    s.framesRendered = mNextFrameId - 1;
    s.framesDropped  = mDropped;
    if (!mFrameMs.empty()) {
        s.meanFrameMs = std::accumulate(mFrameMs.begin(), mFrameMs.end(), 0.0) / mFrameMs.size();
        std::vector<double> sorted = mFrameMs;
        std::sort(sorted.begin(), sorted.end());
        s.p95FrameMs = sorted[static_cast<std::size_t>(0.95 * (sorted.size() - 1))];
    }
    if (mFirstFrame) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - *mFirstFrame).count();
        if (elapsed > 0.0)
            s.fps = static_cast<double>(s.framesRendered) / elapsed;
    }
    return s;
}

Session::LastFrame
Session::lastFrame() const {
    std::lock_guard lock(mMutex);
    return mLast;
}

} // namespace hsplat
