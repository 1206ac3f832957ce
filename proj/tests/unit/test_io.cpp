// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"
#include "image_io.hpp"
#include "json_io.hpp"
#include "scene_bundle.hpp"
#include "test_support.hpp"

#include <fstream>

using namespace hsplat;
using namespace hsplat::testing;

TEST(Config, DefaultsAndFixedPoint) {
    const EngineConfig d = configFromJson(Json::object());
    EXPECT_EQ(d.render.alphaMax, 0.99);
    EXPECT_EQ(d.render.tileSize, 16);
    EXPECT_EQ(d.optimizer.lrReduction, 10.0);
    EXPECT_EQ(d.maskVote.tau, 0.6);
    EXPECT_EQ(d.service.format, "png");
    const Json once  = configToJson(d);
    const Json twice = configToJson(configFromJson(once));
    EXPECT_EQ(once, twice);
}

TEST(Config, PartialFileKeepsOtherDefaults) {
    TempDir dir("config");
    std::ofstream(dir / "c.json") << R"({"render": {"tile_size": 8}, "mask_vote": {"tau": 0.75}})";
    const EngineConfig c = loadConfig(dir / "c.json");
    EXPECT_EQ(c.render.tileSize, 8);
    EXPECT_EQ(c.maskVote.tau, 0.75);
    EXPECT_EQ(c.render.alphaMax, 0.99);
    saveResolvedConfig(c, dir / "resolved.json");
    const EngineConfig r = loadConfig(dir / "resolved.json");
    EXPECT_EQ(configToJson(r), configToJson(c));
    EXPECT_EQ(configToJson(loadConfigOrDefault({})), configToJson(EngineConfig{}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_TRUE(throwsKind([] { configFromJson(Json::parse(R"({"rendr": {}})")); }, ErrorKind::kParse, "rendr"));
    EXPECT_TRUE(throwsKind([] { configFromJson(Json::parse(R"({"render": {"tile_sise": 4}})")); },
                           ErrorKind::kParse, "tile_sise"));
    EXPECT_TRUE(throwsKind([] { configFromJson(Json::parse(R"({"render": {"alpha_max": "high"}})")); },
                           ErrorKind::kParse));
    EXPECT_TRUE(throwsKind([] { configFromJson(Json::parse(R"({"mask_vote": {"tau": 1.5}})")).validate(); },
                           ErrorKind::kInvalidInput));
    EXPECT_TRUE(throwsKind([] { loadConfig("/nonexistent/config.json"); }, ErrorKind::kParse));
}

TEST(ImageIo, PngRoundTripAndMask) {
    TempDir dir("png");
    Image img(7, 5, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<double>((i * 13) % 256) / 255.0;
    savePng(img, dir / "a.png");
    const Image back = loadPng(dir / "a.png");
    for (std::size_t i = 0; i < img.data.size(); ++i)
        EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
    EXPECT_EQ(encodePng(img), readFileBytes(dir / "a.png"));

    Image m(4, 4, 1, 0.0);
    m.at(1, 2) = 0.2;
    savePng(m, dir / "m.png");
    const Image mask = loadMask(dir / "m.png");
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            EXPECT_EQ(mask.at(x, y), (x == 1 && y == 2) ? 1.0 : 0.0);
}

TEST(ImageIo, RasterRoundTripIsFloatExact) {
    TempDir dir("raster");
    Image img(6, 4, 2);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = 0.1 * static_cast<double>(i) - 1.0;
    img.data[3] = std::numeric_limits<double>::infinity();
    saveRaster(img, dir / "a.raster");
    const Image back = loadRaster(dir / "a.raster");
    ASSERT_TRUE(back.sameShape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i)
        EXPECT_EQ(back.data[i], static_cast<double>(static_cast<float>(img.data[i])));
    saveRaster(back, dir / "b.raster");
    EXPECT_EQ(readFileBytes(dir / "a.raster"), readFileBytes(dir / "b.raster"));
}

TEST(ImageIo, Errors) {
    TempDir dir("img_err");
    std::ofstream(dir / "bad.png") << "nope";
    EXPECT_TRUE(throwsKind([&] { loadPng(dir / "bad.png"); }, ErrorKind::kParse));
    EXPECT_TRUE(throwsKind([&] { loadRaster(dir / "bad.png"); }, ErrorKind::kParse));
    EXPECT_TRUE(throwsKind([&] { loadPng(dir / "missing.png"); }, ErrorKind::kParse));
}

TEST(JsonIo, CameraAndParamsRoundTrip) {
    const SceneBundle s  = makeFixtureScene();
    const CameraRig &cam = s.camera("cam1");
    const CameraRig back = cameraFromJson(cameraToJson(cam));
    EXPECT_EQ(back.width, cam.width);
    EXPECT_EQ(back.fx, cam.fx);
    EXPECT_LT((back.worldToCamera.matrix() - cam.worldToCamera.matrix()).cwiseAbs().maxCoeff(), 1e-15);

    HeadParams p = s.params;
    p.shape.setConstant(0.3);
    p.pose[2]           = Vec3(0.1, -0.2, 0.05);
    p.globalTranslation = Vec3(0.01, 0.02, 0.03);
    const HeadParams q  = paramsFromJson(paramsToJson(p), *s.model);
    EXPECT_EQ(q.shape, p.shape);
    EXPECT_EQ(q.pose[2], p.pose[2]);
    EXPECT_EQ(q.globalTranslation, p.globalTranslation);

    HeadParams partial = p;
    updateParamsFromJson(Json{{"expression", std::vector<double>(s.model->expressionDims(), 1.0)}}, *s.model, partial);
    EXPECT_EQ(partial.shape, p.shape);
    EXPECT_EQ(partial.expression[0], 1.0);
    EXPECT_TRUE(throwsKind([&] { updateParamsFromJson(Json{{"shape", {1.0}}}, *s.model, partial); },
                           ErrorKind::kInvalidInput, "shape"));
}

TEST(SceneBundle, SaveLoadRendersIdentically) {
    TempDir dir("bundle");
    const SceneBundle s = makeFixtureScene();
    saveSceneBundle(s, dir.path());
    const SceneBundle r = loadSceneBundle(dir.path());
    EXPECT_EQ(r.cameras.size(), s.cameras.size());
    EXPECT_EQ(r.head.size(), s.head.size());
    EXPECT_EQ(r.background.size(), s.background.size());
    const CameraRig &cam = s.camera("cam0");
    const RenderOutput a = render(composeScene(s), cam);
    const RenderOutput b = render(composeScene(r), r.camera("cam0"));
    double worst         = 0.0;
    for (std::size_t i = 0; i < a.color.data.size(); ++i)
        worst = std::max(worst, std::abs(a.color.data[i] - b.color.data[i]));
    EXPECT_LT(worst, 1e-4); // the bundle stores float32 attributes
    EXPECT_TRUE(throwsKind([&] { r.camera("cam9"); }, ErrorKind::kInvalidInput, "cam9"));
    EXPECT_TRUE(throwsKind([&] { loadSceneBundle(dir / "nope"); }, ErrorKind::kParse));
}
