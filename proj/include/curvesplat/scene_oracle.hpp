#pragma once

#include "curvesplat/camera.hpp"
#include "curvesplat/curve_set.hpp"
#include "curvesplat/edge_map.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace curvesplat {

enum class SceneKind { Cube, Circle, Helix, Mixed };

SceneKind scene_kind_from_string(const std::string& name);
const char* scene_kind_name(SceneKind kind);

struct SyntheticScene {
    std::string name;
    CurveSet gt_curves;
    std::vector<Camera> cameras;
    std::vector<EdgeMap> edge_maps;  // one per camera, same order
};

/// Ground-truth curves for one scene kind, centered near the origin at unit
/// scale (cube edges span [-0.5, 0.5]).
std::vector<ParametricCurve> make_gt_curves(SceneKind kind);

/// Cameras on a seed-jittered sphere around the scene, all looking at the
/// ground-truth centroid.
std::vector<Camera> make_camera_ring(int n_views, int image_size, const Aabb& bounds,
                                     std::uint64_t seed);

/// Full synthetic dataset: curves, cameras, and oracle-rendered edge maps.
SyntheticScene make_scene(SceneKind kind, int n_views, int image_size, std::uint64_t seed,
                          double line_width_px = 2.0);

/// Non-differentiable reference rasterizer: dense polyline projection drawn
/// with a fixed pixel width at value 1, 2x2 supersampled. Visibility is
/// ignored (wireframe convention). Shares no projection or compositing code
/// with the splatting renderer.
EdgeMap oracle_render(const std::vector<ParametricCurve>& curves, const Camera& cam,
                      double line_width_px);

/// Dataset directory layout consumed by training and evaluation:
/// cameras.json, edges/<view_id>.png, gt_curves.json.
void write_dataset(const std::filesystem::path& dir, const SyntheticScene& scene);

}  // namespace curvesplat
