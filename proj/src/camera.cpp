#include "curvesplat/camera.hpp"

#include "curvesplat/errors.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace curvesplat {

using nlohmann::json;

bool Camera::valid(double tol) const {
    if (!(fx > 0.0 && fy > 0.0) || width <= 0 || height <= 0) {
        return false;
    }
    const Mat3 r = rotation();
    return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 fwd = target - eye;
    const double n = fwd.norm();
    if (!(n > 0.0)) {
        throw Error("look_at: eye and target coincide");
    }
    fwd /= n;
    Vec3 up_hint = up;
    if (std::abs(fwd.dot(up_hint.normalized())) > 0.999) {
        up_hint = Vec3(0, 1, 0);
        if (std::abs(fwd.dot(up_hint)) > 0.999) {
            up_hint = Vec3(1, 0, 0);
        }
    }
    const Vec3 right = fwd.cross(up_hint).normalized();
    const Vec3 down = fwd.cross(right);  // +y down to match image rows

    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = fwd.transpose();

    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r;
    m.topRightCorner<3, 1>() = -r * eye;
    return m;
}

std::string cameras_to_json(const std::vector<Camera>& cams) {
    json doc = json::array();
    for (const auto& c : cams) {
        json jc;
        jc["id"] = c.id;
        jc["width"] = c.width;
        jc["height"] = c.height;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        json m = json::array();
        for (int r = 0; r < 4; ++r) {
            for (int col = 0; col < 4; ++col) {
                m.push_back(c.world_to_camera(r, col));
            }
        }
        jc["world_to_camera"] = std::move(m);
        doc.push_back(std::move(jc));
    }
    return doc.dump(2) + "\n";
}

std::vector<Camera> cameras_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("cameras file: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ParseError("cameras file: expected a JSON array of cameras");
    }
    std::vector<Camera> out;
    out.reserve(doc.size());
    for (const auto& jc : doc) {
        Camera c;
        c.id = jc.at("id").get<int>();
        c.width = jc.at("width").get<int>();
        c.height = jc.at("height").get<int>();
        c.fx = jc.at("fx").get<double>();
        c.fy = jc.at("fy").get<double>();
        c.cx = jc.at("cx").get<double>();
        c.cy = jc.at("cy").get<double>();
        const auto& m = jc.at("world_to_camera");
        if (!m.is_array() || m.size() != 16) {
            throw ParseError("cameras file: world_to_camera of camera id " +
                             std::to_string(c.id) + " must hold 16 floats");
        }
        for (int r = 0; r < 4; ++r) {
            for (int col = 0; col < 4; ++col) {
                c.world_to_camera(r, col) = m[4 * r + col].get<double>();
            }
        }
        if (!c.valid()) {
            throw ParseError("cameras file: camera id " + std::to_string(c.id) +
                             " has invalid intrinsics or non-orthonormal rotation");
        }
        out.push_back(c);
    }
    return out;
}

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open for writing: " + path.string());
    }
    f << cameras_to_json(cams);
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open: " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return cameras_from_json(ss.str());
}

Aabb bounds_from_cameras(const std::vector<Camera>& cams) {
    if (cams.empty()) {
        throw DegenerateBounds("bounds_from_cameras: no cameras");
    }

    // Least-squares intersection of the optical axes:
    // minimize sum_i |(I - a a^T)(x - c_i)|^2.
    Mat3 a_sum = Mat3::Zero();
    Vec3 b_sum = Vec3::Zero();
    for (const auto& cam : cams) {
        const Vec3 axis = cam.forward();
        const Mat3 proj = Mat3::Identity() - axis * axis.transpose();
        a_sum += proj;
        b_sum += proj * cam.position();
    }
    Vec3 focus;
    const Eigen::FullPivLU<Mat3> lu(a_sum);
    if (lu.isInvertible()) {
        focus = lu.solve(b_sum);
    } else {
        // All axes parallel; fall back to the centroid of camera positions.
        focus = Vec3::Zero();
        for (const auto& cam : cams) {
            focus += cam.position();
        }
        focus /= static_cast<double>(cams.size());
    }

    std::vector<double> depths;
    depths.reserve(cams.size());
    for (const auto& cam : cams) {
        depths.push_back(std::max((focus - cam.position()).dot(cam.forward()), 1e-6));
    }
    std::vector<double> sorted = depths;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median_depth = sorted[sorted.size() / 2];

    // Frustum cross-section at the median depth, for every camera.
    Aabb box;
    for (const auto& cam : cams) {
        const Mat3 r_inv = cam.rotation().transpose();
        const Vec3 origin = cam.position();
        const double corners[5][2] = {{0.0, 0.0},
                                      {double(cam.width), 0.0},
                                      {0.0, double(cam.height)},
                                      {double(cam.width), double(cam.height)},
                                      {0.5 * cam.width, 0.5 * cam.height}};
        for (const auto& uv : corners) {
            const Vec3 dir_cam((uv[0] - cam.cx) / cam.fx, (uv[1] - cam.cy) / cam.fy, 1.0);
            box.expand(origin + r_inv * dir_cam * median_depth);
        }
    }
    if (!box.valid() || !(box.diagonal() > 0.0)) {
        throw DegenerateBounds("bounds_from_cameras: degenerate rig");
    }
    return box;
}

}  // namespace curvesplat
