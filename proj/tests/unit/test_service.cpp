// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "frame_codec.hpp"
#include "image_io.hpp"
#include "json_io.hpp"
#include "scene_bundle.hpp"
#include "session.hpp"
#include "test_support.hpp"
#include "ws_server.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <fstream>
#include <thread>

using namespace hsplat;
using namespace hsplat::testing;
namespace beast     = boost::beast;
namespace websocket = beast::websocket;
namespace http      = beast::http;
using tcp           = boost::asio::ip::tcp;

namespace {

std::shared_ptr<const SceneBundle>
fixtureScene() {
    static const auto scene = std::make_shared<const SceneBundle>(makeFixtureScene());
    return scene;
}

class CollectingSink : public FrameSink {
  public:
    bool
    offerFrame(const FrameBytes &frame) override {
        std::lock_guard lock(mutex);
        frames.push_back(frame);
        times.push_back(std::chrono::steady_clock::now());
        return true;
    }
    std::vector<FrameBytes>
    snapshot() {
        std::lock_guard lock(mutex);
        return frames;
    }
    std::mutex mutex;
    std::vector<FrameBytes> frames;
    std::vector<std::chrono::steady_clock::time_point> times;
};

/// Holds at most `depth` frames and never drains.
class StalledSink : public FrameSink {
  public:
    explicit StalledSink(std::size_t depth) : mDepth(depth) {}
    bool
    offerFrame(const FrameBytes &frame) override {
        if (held.size() >= mDepth)
            return false;
        held.push_back(frame);
        return true;
    }
    std::vector<FrameBytes> held;

  private:
    std::size_t mDepth;
};

Json
reply(Session &s, const Json &msg) {
    return Json::parse(s.handleMessage(msg.dump()));
}

double
maxAbsDiff(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace

TEST(FrameCodec, RawRgbaBytesAreExact) {
    Image color(2, 2, 3), alpha(2, 2, 1);
    const double px[4][4] = {{1, 0, 0, 1}, {0, 1, 0, 0.5}, {0, 0, 1, 0}, {0.2, 0.4, 0.6, 0.8}};
    for (int p = 0; p < 4; ++p) {
        for (int c = 0; c < 3; ++c)
            color.data[static_cast<std::size_t>(p * 3 + c)] = px[p][c];
        alpha.data[static_cast<std::size_t>(p)] = px[p][3];
    }
    const auto msg = encodeFrame(color, alpha, 7, FrameFormat::kRgba);
    const std::vector<std::uint8_t> expected = {
        0x48, 0x53, 0x46, 0x52, 7, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 16, 0, 0, 0,
        255,  0,    0,    255,  0, 255, 0, 128, 0, 0, 255, 0, 51, 102, 153, 204};
    EXPECT_EQ(msg, expected);
    const FrameHeader h = parseFrameHeader(msg);
    EXPECT_EQ(h.frameId, 7u);
    EXPECT_EQ(h.payloadLength, 16u);
}

TEST(FrameCodec, PngRoundTripIsPixelIdentical) {
    Image color(5, 3, 3), alpha(5, 3, 1);
    for (std::size_t i = 0; i < color.data.size(); ++i)
        color.data[i] = static_cast<double>((i * 37) % 256) / 255.0;
    for (std::size_t i = 0; i < alpha.data.size(); ++i)
        alpha.data[i] = static_cast<double>((i * 91) % 256) / 255.0;
    const auto png  = encodeFrame(color, alpha, 1, FrameFormat::kPng);
    const auto raw  = encodeFrame(color, alpha, 1, FrameFormat::kRgba);
    FrameHeader h;
    const Image a = decodeFrame(png, &h);
    EXPECT_EQ(h.format, static_cast<std::uint32_t>(FrameFormat::kPng));
    EXPECT_EQ(a.data, decodeFrame(raw).data);
    for (std::size_t p = 0; p < color.pixelCount(); ++p)
        for (int c = 0; c < 3; ++c)
            EXPECT_NEAR(a.data[p * 4 + static_cast<std::size_t>(c)], color.data[p * 3 + static_cast<std::size_t>(c)], 1e-12);
}

TEST(FrameCodec, Errors) {
    EXPECT_TRUE(throwsKind([] { encodeFrame(Image(0, 0, 3), Image(), 1, FrameFormat::kRgba); },
                           ErrorKind::kInvalidInput));
    EXPECT_TRUE(throwsKind([] { encodeFrame(Image(2, 2, 3), Image(), 1, 9u); }, ErrorKind::kInvalidInput));
    EXPECT_TRUE(throwsKind([] { frameFormatFromName("jpeg"); }, ErrorKind::kInvalidInput));
    auto msg = encodeFrame(Image(2, 2, 3), Image(), 1, FrameFormat::kRgba);
    msg.pop_back();
    EXPECT_TRUE(throwsKind([&] { parseFrameHeader(msg); }, ErrorKind::kParse));
}

TEST(Session, NeutralExpressionMatchesGoldenRender) {
    const auto scene = fixtureScene();
    Session s(scene, {});
    Json msg = {{"type", "set_params"}, {"expression", std::vector<double>(scene->model->expressionDims(), 0.0)}};
    EXPECT_EQ(reply(s, msg)["type"], "ok");
    ASSERT_TRUE(s.step());
    HeadParams neutral  = scene->params;
    neutral.expression.setZero();
    const RenderOutput golden = render(composeScene(*scene, neutral), scene->camera("cam0"));
    EXPECT_LE(maxAbsDiff(s.lastFrame().output.color, golden.color), 1e-5);
}

TEST(Session, RapidUpdatesCoalesce) {
    const auto scene = fixtureScene();
    Session s(scene, {});
    auto sink = std::make_shared<CollectingSink>();
    s.attach(sink);
    ASSERT_TRUE(s.step()); // initial frame
    const int dims = scene->model->expressionDims();
    std::vector<double> first(dims, 0.5), second(dims, -0.25);
    reply(s, {{"type", "set_params"}, {"expression", first}});
    reply(s, {{"type", "set_params"}, {"expression", second}});
    ASSERT_TRUE(s.step());
    EXPECT_FALSE(s.step());
    EXPECT_EQ(sink->snapshot().size(), 2u);
    const HeadParams last = s.lastFrame().params;
    for (int i = 0; i < dims; ++i)
        EXPECT_EQ(last.expression[i], -0.25);
}

TEST(Session, ThreeFrameTrackYieldsThreeFrames) {
    TempDir dir("track");
    const auto scene = fixtureScene();
    AnimationTrack track;
    for (int i = 0; i < 3; ++i) {
        TrackFrame f;
        f.time   = 0.02 * i;
        f.params = scene->params;
        f.params.expression.setConstant(0.1 * i);
        track.push_back(f);
    }
    saveAnimationTrack(track, dir / "track.json");
    Session s(scene, {});
    auto sink = std::make_shared<CollectingSink>();
    ASSERT_TRUE(s.step());
    s.attach(sink);
    const Json r = reply(s, {{"type", "play_track"}, {"path", (dir / "track.json").string()}});
    EXPECT_EQ(r["type"], "track_queued");
    EXPECT_EQ(r["frames"], 3);
    s.start();
    for (int i = 0; i < 200 && sink->snapshot().size() < 3; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    s.stop();
    const auto frames = sink->snapshot();
    ASSERT_EQ(frames.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_EQ(parseFrameHeader(*frames[i]).frameId, 2u + i);
    EXPECT_EQ(s.lastFrame().params.expression[0], 0.2);
}

TEST(Session, StalledSinkDropsWithoutBlocking) {
    SessionOptions o;
    o.continuous = true;
    o.fpsCap     = 200.0;
    Session s(fixtureScene(), o);
    auto stalled = std::make_shared<StalledSink>(2);
    auto live    = std::make_shared<CollectingSink>();
    s.attach(stalled);
    s.attach(live);
    for (int i = 0; i < 12; ++i)
        ASSERT_TRUE(s.step());
    EXPECT_EQ(stalled->held.size(), 2u);
    EXPECT_EQ(live->snapshot().size(), 12u);
    EXPECT_EQ(s.stats().framesDropped, 10u);
    // Frame ids strictly increase.
    std::uint32_t prev = 0;
    for (const auto &f : live->snapshot()) {
        const std::uint32_t id = parseFrameHeader(*f).frameId;
        EXPECT_GT(id, prev);
        prev = id;
    }
}

TEST(Session, StatsFpsMatchesObservedRate) {
    SessionOptions o;
    o.continuous = true;
    o.fpsCap     = 25.0;
    o.format     = FrameFormat::kRgba;
    Session s(fixtureScene(), o);
    auto sink = std::make_shared<CollectingSink>();
    s.attach(sink);
    s.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(2000));
    const SessionStats st = s.stats();
    const auto now        = std::chrono::steady_clock::now();
    s.stop();
    std::vector<std::chrono::steady_clock::time_point> times;
    {
        std::lock_guard lock(sink->mutex);
        times = sink->times;
    }
    ASSERT_GT(times.size(), 10u);
    // Count frames delivered up to the stats call.
    std::size_t count = 0;
    for (auto t : times)
        count += t <= now;
    const double observed = static_cast<double>(st.framesRendered) /
                            std::chrono::duration<double>(now - times.front()).count();
    EXPECT_NEAR(st.fps, observed, 0.05 * observed);
    EXPECT_NEAR(st.fps, 25.0, 0.05 * 25.0);
    EXPECT_GT(st.meanFrameMs, 0.0);
    EXPECT_GE(st.p95FrameMs, 0.0);
    EXPECT_GE(count, st.framesRendered - 1);
}

TEST(Session, MessageErrorsBecomeReplies) {
    Session s(fixtureScene(), {});
    EXPECT_EQ(Json::parse(s.handleMessage("not json"))["type"], "error");
    EXPECT_EQ(reply(s, {{"type", "bogus"}})["type"], "error");
    EXPECT_EQ(reply(s, {{"type", "set_params"}, {"expression", {1.0}}})["type"], "error");
    EXPECT_EQ(reply(s, {{"type", "play_track"}, {"path", "/nonexistent/track.json"}})["type"], "error");
    EXPECT_EQ(reply(s, {{"type", "set_format"}, {"format", "rgba"}})["type"], "ok");
    const Json ranges = reply(s, {{"type", "get_ranges"}});
    EXPECT_EQ(ranges["type"], "ranges");
    EXPECT_EQ(ranges["expression"]["count"], fixtureScene()->model->expressionDims());
    EXPECT_EQ(ranges["format"], "rgba");
    EXPECT_EQ(reply(s, {{"type", "get_stats"}})["type"], "stats");
}

TEST(WebSocket, BindAddressParsing) {
    const ServerOptions a = parseBindAddress("0.0.0.0:9000");
    EXPECT_EQ(a.host, "0.0.0.0");
    EXPECT_EQ(a.port, 9000);
    EXPECT_EQ(parseBindAddress(":0").port, 0);
    EXPECT_TRUE(throwsKind([] { parseBindAddress("localhost:99999"); }, ErrorKind::kUsage));
}

TEST(WebSocket, RoundTripOverLoopback) {
    TempDir ui("ui");
    std::ofstream(ui / "index.html") << "<html>viewer</html>";
    SessionOptions so;
    so.fpsCap = 60.0;
    Session session(fixtureScene(), so);
    ServerOptions opts;
    opts.port  = 0;
    opts.uiDir = ui.path();
    WebSocketServer server(session, opts);
    server.start();
    session.start();
    const std::string port = std::to_string(server.port());

    boost::asio::io_context ioc;
    const auto endpoints = tcp::resolver(ioc).resolve("127.0.0.1", port);

    const auto get = [&](const std::string &target) {
        beast::tcp_stream stream(ioc);
        stream.connect(endpoints);
        http::request<http::empty_body> req{http::verb::get, target, 11};
        req.set(http::field::host, "127.0.0.1");
        http::write(stream, req);
        beast::flat_buffer buf;
        http::response<http::string_body> res;
        http::read(stream, buf, res);
        return res;
    };
    const auto ranges = get("/ranges.json");
    EXPECT_EQ(ranges.result(), http::status::ok);
    EXPECT_EQ(Json::parse(ranges.body())["type"], "ranges");
    EXPECT_EQ(get("/").body(), "<html>viewer</html>");
    EXPECT_EQ(get("/missing.js").result(), http::status::not_found);

    websocket::stream<tcp::socket> ws(ioc);
    boost::asio::connect(ws.next_layer(), endpoints);
    ws.handshake("127.0.0.1", "/");
    ws.write(boost::asio::buffer(Json{{"type", "set_params"}, {"global_translation", {0.0, 0.01, 0.0}}}.dump()));
    bool gotOk = false, gotFrame = false;
    for (int i = 0; i < 10 && !(gotOk && gotFrame); ++i) {
        beast::flat_buffer buf;
        ws.read(buf);
        if (ws.got_text()) {
            const Json j = Json::parse(beast::buffers_to_string(buf.data()));
            gotOk |= j["type"] == "ok";
        } else {
            const auto bytes = static_cast<const std::uint8_t *>(buf.data().data());
            const std::vector<std::uint8_t> msg(bytes, bytes + buf.size());
            const FrameHeader h = parseFrameHeader(msg);
            EXPECT_EQ(h.width, 128u);
            gotFrame = true;
        }
    }
    EXPECT_TRUE(gotOk);
    EXPECT_TRUE(gotFrame);
    ws.close(websocket::close_code::normal);
    session.stop();
    server.stop();
}

TEST(WebSocket, LaggingClientDoesNotStallRendering) {
    SessionOptions so;
    so.fpsCap     = 120.0;
    so.continuous = true;
    so.format     = FrameFormat::kRgba;
    Session session(fixtureScene(), so);
    ServerOptions opts;
    opts.port       = 0;
    opts.queueDepth = 2;
    WebSocketServer server(session, opts);
    server.start();

    boost::asio::io_context ioc;
    websocket::stream<tcp::socket> ws(ioc);
    boost::asio::connect(ws.next_layer(), tcp::resolver(ioc).resolve("127.0.0.1", std::to_string(server.port())));
    ws.next_layer().set_option(boost::asio::socket_base::receive_buffer_size(4096));
    ws.handshake("127.0.0.1", "/");
    // The client never reads from here on.
    session.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(3000));
    const SessionStats st = session.stats();
    session.stop();
    server.stop();
    EXPECT_GT(st.framesDropped, 0u);
    EXPECT_GT(st.framesRendered, 100u); // the loop kept rendering near the cap
}
