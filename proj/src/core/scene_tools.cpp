// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "scene_tools.hpp"

#include "error.hpp"
#include "image_io.hpp"
#include "json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hsplat {

void
MaskVoteConfig::validate() const {
    HS_CHECK_INPUT(tau > 0.0 && tau <= 1.0, "mask vote: tau must be in (0, 1]");
    HS_CHECK_INPUT(minViews >= 1, "mask vote: min_views must be >= 1");
    HS_CHECK_INPUT(depthTolerance > 0.0, "mask vote: depth_tolerance must be positive");
    HS_CHECK_INPUT(dilationRadius >= 0, "mask vote: dilation_radius must be >= 0");
}

Image
dilateMask(const Image &mask, int radius) {
    HS_CHECK_INPUT(mask.channels == 1, "dilate: mask must have one channel");
    HS_CHECK_INPUT(radius >= 0, "dilate: radius must be >= 0");
    const int w = mask.width, h = mask.height;
    // Separable max filter: rows, then columns.
    Image rows(w, h, 1), out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius) && v == 0.0; ++xx)
                v = mask.at(xx, y) != 0.0 ? 1.0 : 0.0;
            rows.at(x, y) = v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius) && v == 0.0; ++yy)
                v = rows.at(x, yy);
            out.at(x, y) = v;
        }
    return out;
}

VoteCounts
countVotes(const GaussianCloud &cloud, const std::vector<LabelView> &views,
           const MaskVoteConfig &config, const RenderOptions &options) {
    config.validate();
    HS_CHECK_INPUT(static_cast<int>(views.size()) >= config.minViews,
                   "label: fewer views than min_views");
    const std::size_t n = cloud.size();
    VoteCounts votes{std::vector<int>(n, 0), std::vector<int>(n, 0)};
    for (const LabelView &view : views) {
        const CameraRig &cam = view.camera;
        HS_CHECK_INPUT(view.mask.width == cam.width && view.mask.height == cam.height &&
                           view.mask.channels == 1,
                       "label: mask for view " + view.id + " does not match its camera");
        const Image mask  = dilateMask(view.mask, config.dilationRadius);
        const Image depth = render(cloud, cam, options).depth;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 t = cam.toCamera(cloud.positions[i]);
            if (!(t.z() > cam.nearPlane && t.z() < cam.farPlane))
                continue;
            const Vec2 uv   = cam.project(t);
            const double px = std::floor(uv.x() + 0.5), py = std::floor(uv.y() + 0.5);
            if (px < 0 || py < 0 || px >= cam.width || py >= cam.height)
                continue;
            const int x = static_cast<int>(px), y = static_cast<int>(py);
            if (t.z() > depth.at(x, y) + config.depthTolerance)
                continue;
            ++votes.visibleViews[i];
            if (mask.at(x, y) != 0.0)
                ++votes.maskHits[i];
        }
    }
    if (std::none_of(votes.visibleViews.begin(), votes.visibleViews.end(), [](int v) { return v > 0; }))
        throwInvalid("label: no Gaussian is visible in any view");
    return votes;
}

std::vector<std::uint8_t>
flagsFromVotes(const VoteCounts &votes, const MaskVoteConfig &config) {
    config.validate();
    std::vector<std::uint8_t> flags(votes.visibleViews.size(), 0);
    for (std::size_t i = 0; i < flags.size(); ++i) {
        const int visible = votes.visibleViews[i];
        flags[i] = visible >= config.minViews && visible > 0 &&
                   static_cast<double>(votes.maskHits[i]) >= config.tau * visible;
    }
    return flags;
}

std::vector<std::uint8_t>
labelPersonGaussians(const GaussianCloud &cloud, const std::vector<LabelView> &views,
                     const MaskVoteConfig &config, const RenderOptions &options) {
    return flagsFromVotes(countVotes(cloud, views, config, options), config);
}

GaussianCloud
removeFlagged(const GaussianCloud &cloud, const std::vector<std::uint8_t> &flags) {
    HS_CHECK_INPUT(flags.size() == cloud.size(), "remove: flag count does not match the cloud");
    GaussianCloud out;
    out.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!flags[i])
            out.pushFrom(cloud, i);
    return out;
}

std::vector<CoverageRow>
removalReport(const GaussianCloud &cloud, const std::vector<std::uint8_t> &flags,
              const std::vector<LabelView> &views, const RenderOptions &options) {
    HS_CHECK_INPUT(flags.size() == cloud.size(), "report: flag count does not match the cloud");
    std::vector<std::uint8_t> keepFlagged(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i)
        keepFlagged[i] = !flags[i];
    const GaussianCloud removed = removeFlagged(cloud, keepFlagged);
    std::vector<CoverageRow> rows;
    for (const LabelView &view : views) {
        const Image alpha = render(removed, view.camera, options).alpha;
        std::size_t covered = 0;
        for (double a : alpha.data)
            covered += a >= 0.5;
        rows.push_back({view.id, static_cast<double>(covered) / static_cast<double>(alpha.data.size())});
    }
    return rows;
}

void
writeRemovalReport(const std::vector<CoverageRow> &rows, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out)
        throwRuntime("cannot write " + path.string());
    out.precision(9);
    out << "view,removed_fraction\n";
    for (const auto &r : rows)
        out << r.view << ',' << r.removedFraction << '\n';
}

std::vector<LabelView>
loadLabelViews(const std::filesystem::path &dir) {
    const Json cams = readJsonFile(dir / "cameras.json");
    if (!cams.contains("views") || !cams["views"].is_array())
        throwParse((dir / "cameras.json").string() + ": missing 'views' array");
    std::vector<LabelView> views;
    for (const Json &v : cams["views"]) {
        LabelView view;
        view.id     = v.at("id").get<std::string>();
        view.camera = cameraFromJson(v);
        view.mask   = loadMask(dir / "masks" / (view.id + ".png"));
        views.push_back(std::move(view));
    }
    return views;
}

} // namespace hsplat
