#include "curvesplat/dataset.hpp"

#include "curvesplat/errors.hpp"

#include <cstdio>

namespace curvesplat {

namespace {

std::filesystem::path find_edge_file(const std::filesystem::path& dir, int view_id) {
    char padded[32];
    std::snprintf(padded, sizeof(padded), "%03d", view_id);
    const std::string plain = std::to_string(view_id);
    for (const std::string& stem : {std::string(padded), plain}) {
        for (const char* ext : {".png", ".pgm"}) {
            const auto candidate = dir / "edges" / (stem + ext);
            if (std::filesystem::exists(candidate)) {
                return candidate;
            }
        }
    }
    throw ConfigError("dataset: no edge map for camera id " + plain + " under " +
                      (dir / "edges").string());
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto cameras_path = dir / "cameras.json";
    if (!std::filesystem::exists(cameras_path)) {
        throw ConfigError("dataset: missing cameras.json in " + dir.string());
    }
    Dataset ds;
    const auto cameras = load_cameras(cameras_path);
    if (cameras.empty()) {
        throw ConfigError("dataset: cameras.json holds no cameras: " + cameras_path.string());
    }
    ds.views.reserve(cameras.size());
    for (const auto& cam : cameras) {
        TrainView view;
        view.camera = cam;
        view.edges = load_edge_map(find_edge_file(dir, cam.id));
        if (view.edges.width != cam.width || view.edges.height != cam.height) {
            throw ConfigError("dataset: edge map for camera id " + std::to_string(cam.id) +
                              " is " + std::to_string(view.edges.width) + "x" +
                              std::to_string(view.edges.height) + ", camera expects " +
                              std::to_string(cam.width) + "x" + std::to_string(cam.height));
        }
        ds.views.push_back(std::move(view));
    }
    const auto gt = dir / "gt_curves.json";
    if (std::filesystem::exists(gt)) {
        ds.gt_curves_path = gt;
    }
    return ds;
}

}  // namespace curvesplat
