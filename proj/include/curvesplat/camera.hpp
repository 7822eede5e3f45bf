#pragma once

#include "curvesplat/types.hpp"

#include <filesystem>
#include <vector>

namespace curvesplat {

/// Pinhole camera: intrinsics in pixels, rigid world-to-camera pose with the
/// optical axis along +z in camera space.
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    Mat4 world_to_camera = Mat4::Identity();

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    /// Camera center in world coordinates.
    Vec3 position() const { return -rotation().transpose() * translation(); }
    /// World-space viewing direction (optical axis).
    Vec3 forward() const { return rotation().row(2).transpose(); }

    Vec3 to_camera(const Vec3& p_world) const { return rotation() * p_world + translation(); }

    /// Rotation block orthonormal to tol and intrinsics positive.
    bool valid(double tol = 1e-6) const;
};

/// Pose looking from `eye` toward `target`; `up` is a hint, replaced when
/// nearly parallel to the view direction.
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

/// cameras.json: a JSON array of {"id","width","height","fx","fy","cx","cy",
/// "world_to_camera": 16 floats row-major}.
std::string cameras_to_json(const std::vector<Camera>& cams);
std::vector<Camera> cameras_from_json(const std::string& text);
void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

/// Scene bounds estimated from the camera rig alone: the optical axes are
/// intersected in least squares to locate the scene, then each frustum's
/// cross-section at the median view distance is accumulated.
Aabb bounds_from_cameras(const std::vector<Camera>& cams);

}  // namespace curvesplat
