// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Live reenactment session: latest-wins parameter ingestion, a single
// render loop, and non-blocking frame fan-out. Transport-agnostic; see
// ws_server.hpp for the websocket adapter.

#pragma once

#include "camera.hpp"
#include "frame_codec.hpp"
#include "json_io.hpp"
#include "rasterizer.hpp"
#include "scene_bundle.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hsplat {

struct TrackFrame {
    double time = 0.0; // seconds
    HeadParams params;
    std::optional<CameraRig> camera;
};

using AnimationTrack = std::vector<TrackFrame>;

/// {"frames": [{"time": s, "params": {...}, "camera": {...}?}, ...]};
/// times must strictly increase.
AnimationTrack loadAnimationTrack(const std::filesystem::path &path, const HeadModel &model);
void saveAnimationTrack(const AnimationTrack &track, const std::filesystem::path &path);

using FrameBytes = std::shared_ptr<const std::vector<std::uint8_t>>;

/// Receives encoded frames from the render loop. Must not block; returns
/// false if the frame was dropped.
class FrameSink {
  public:
    virtual ~FrameSink()                        = default;
    virtual bool offerFrame(const FrameBytes &frame) = 0;
};

struct SessionOptions {
    RenderOptions render;
    std::string camera = "cam0";
    FrameFormat format = FrameFormat::kPng;
    double fpsCap      = 30.0;
    bool continuous    = false; // render every tick even without updates
};

struct SessionStats {
    std::uint64_t framesRendered = 0;
    std::uint64_t framesDropped  = 0; // summed over sinks
    double meanFrameMs           = 0.0;
    double p95FrameMs            = 0.0;
    double fps                   = 0.0; // frames / seconds since the first frame started
};

class Session {
  public:
    Session(std::shared_ptr<const SceneBundle> scene, SessionOptions options);
    ~Session();

    Session(const Session &)            = delete;
    Session &operator=(const Session &) = delete;

    /// Handles one text command and returns the JSON reply (never throws;
    /// failures become {"type": "error"} replies).
    std::string handleMessage(const std::string &text);

    void attach(const std::shared_ptr<FrameSink> &sink);
    void detach(const FrameSink *sink);

    /// Renders one frame if an update, track frame or continuous tick is
    /// pending. Returns true when a frame was produced.
    bool step();

    /// Background render loop paced by the fps cap.
    void start();
    void stop();

    SessionStats stats() const;
    Json ranges() const;

    /// Atomically replaces the scene snapshot.
    void swapScene(std::shared_ptr<const SceneBundle> scene);

    struct LastFrame {
        std::uint32_t id = 0;
        RenderOutput output;
        HeadParams params;
    };
    LastFrame lastFrame() const;

  private:
    struct Pending {
        HeadParams params;
        CameraRig camera;
        bool dirty = true;
    };

    Json dispatch(const Json &msg);
    bool renderOne(const HeadParams &params, const CameraRig &camera);
    void loop();

    mutable std::mutex mMutex;
    std::condition_variable mWake;
    std::shared_ptr<const SceneBundle> mScene;
    SessionOptions mOptions;
    Pending mPending;
    std::deque<TrackFrame> mTrack;
    std::chrono::steady_clock::time_point mTrackStart;
    bool mTrackStarted = false;
    std::vector<std::weak_ptr<FrameSink>> mSinks;

    std::uint32_t mNextFrameId = 1;
    LastFrame mLast;
    std::uint64_t mDropped = 0;
    std::vector<double> mFrameMs;
    std::optional<std::chrono::steady_clock::time_point> mFirstFrame;

    std::thread mThread;
    bool mStop = false;
};

} // namespace hsplat
