#pragma once

#include "curvesplat/camera.hpp"
#include "curvesplat/edge_map.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace curvesplat {

struct TrainView {
    Camera camera;
    EdgeMap edges;
};

struct Dataset {
    std::vector<TrainView> views;
    std::filesystem::path gt_curves_path;  // empty when absent
};

/// Load a dataset directory (cameras.json + edges/<view_id>.{png,pgm},
/// optional gt_curves.json). Throws ConfigError naming the missing piece.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace curvesplat
