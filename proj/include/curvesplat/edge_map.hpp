#pragma once

#include "curvesplat/errors.hpp"

#include <filesystem>
#include <vector>

namespace curvesplat {

/// Single-channel image with values in [0,1]; row-major, top-left origin.
struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    EdgeMap() = default;
    EdgeMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return values.size(); }

    bool in_range() const;
};

/// 8-bit grayscale image I/O; PNG and PGM (P5) are interchangeable, chosen by
/// file extension. Pixels map v -> v/255 on read and round(v*255) on write.
void save_edge_map(const std::filesystem::path& path, const EdgeMap& map);
EdgeMap load_edge_map(const std::filesystem::path& path);

}  // namespace curvesplat
