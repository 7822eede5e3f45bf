#include "curvesplat/scene_oracle.hpp"

#include "curvesplat/curve_io.hpp"
#include "curvesplat/errors.hpp"
#include "curvesplat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace curvesplat {

namespace {

constexpr double kPi = std::numbers::pi;

ParametricCurve make_curve(CurveId id, CurveGeometry geometry) {
    ParametricCurve c;
    c.id = id;
    c.geometry = std::move(geometry);
    c.opacity = 1.0;
    c.thickness = 0.01;
    return c;
}

void append_cube(std::vector<ParametricCurve>& out, CurveId& id) {
    const double h = 0.5;
    const Vec3 corners[8] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                             {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
    const int edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    for (const auto& e : edges) {
        out.push_back(make_curve(id++, LineSegment{corners[e[0]], corners[e[1]]}));
    }
}

// Four-arc cubic approximation of a circle in the plane spanned by (u, v).
void append_circle(std::vector<ParametricCurve>& out, CurveId& id, const Vec3& center,
                   double radius, const Vec3& u, const Vec3& v) {
    const double k = (4.0 / 3.0) * std::tan(kPi / 8.0) * radius;
    for (int q = 0; q < 4; ++q) {
        const double a0 = 0.5 * kPi * q;
        const double a1 = a0 + 0.5 * kPi;
        const Vec3 p0 = center + radius * (std::cos(a0) * u + std::sin(a0) * v);
        const Vec3 p3 = center + radius * (std::cos(a1) * u + std::sin(a1) * v);
        const Vec3 t0 = -std::sin(a0) * u + std::cos(a0) * v;
        const Vec3 t1 = -std::sin(a1) * u + std::cos(a1) * v;
        out.push_back(make_curve(id++, CubicBezier{p0, p0 + k * t0, p3 - k * t1, p3}));
    }
}

void append_helix(std::vector<ParametricCurve>& out, CurveId& id) {
    // 1.5 turns, six quarter-turn arcs, z rising linearly.
    const double radius = 0.4;
    const double z0 = -0.45, z1 = 0.45;
    const int segments = 6;
    const double k = (4.0 / 3.0) * std::tan(kPi / 8.0) * radius;
    for (int s = 0; s < segments; ++s) {
        const double a0 = 0.5 * kPi * s;
        const double a1 = a0 + 0.5 * kPi;
        const double za = z0 + (z1 - z0) * s / segments;
        const double zb = z0 + (z1 - z0) * (s + 1) / segments;
        const double dz = (zb - za) / 3.0;
        const Vec3 p0(radius * std::cos(a0), radius * std::sin(a0), za);
        const Vec3 p3(radius * std::cos(a1), radius * std::sin(a1), zb);
        const Vec3 t0(-std::sin(a0), std::cos(a0), 0.0);
        const Vec3 t1(-std::sin(a1), std::cos(a1), 0.0);
        Vec3 p1 = p0 + k * t0;
        Vec3 p2 = p3 - k * t1;
        p1.z() = za + dz;
        p2.z() = zb - dz;
        out.push_back(make_curve(id++, CubicBezier{p0, p1, p2, p3}));
    }
}

}  // namespace

SceneKind scene_kind_from_string(const std::string& name) {
    if (name == "cube") return SceneKind::Cube;
    if (name == "circle") return SceneKind::Circle;
    if (name == "helix") return SceneKind::Helix;
    if (name == "mixed") return SceneKind::Mixed;
    throw ConfigError("unknown scene kind: \"" + name + "\" (expected cube|circle|helix|mixed)");
}

const char* scene_kind_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::Cube: return "cube";
        case SceneKind::Circle: return "circle";
        case SceneKind::Helix: return "helix";
        case SceneKind::Mixed: return "mixed";
    }
    return "?";
}

std::vector<ParametricCurve> make_gt_curves(SceneKind kind) {
    std::vector<ParametricCurve> out;
    CurveId id = 0;
    switch (kind) {
        case SceneKind::Cube:
            append_cube(out, id);
            break;
        case SceneKind::Circle:
            append_circle(out, id, Vec3::Zero(), 0.5, Vec3(1, 0, 0), Vec3(0, 1, 0));
            break;
        case SceneKind::Helix:
            append_helix(out, id);
            break;
        case SceneKind::Mixed:
            append_cube(out, id);
            append_circle(out, id, Vec3(0, 0, 0.0), 0.5, Vec3(1, 0, 0), Vec3(0, 1, 0));
            break;
    }
    return out;
}

std::vector<Camera> make_camera_ring(int n_views, int image_size, const Aabb& bounds,
                                     std::uint64_t seed) {
    if (n_views < 2) {
        throw ConfigError("make_camera_ring: need at least 2 views");
    }
    const Vec3 target = bounds.center();
    const double scale = std::max(bounds.diagonal(), 1e-6);
    const double base_radius = 1.6 * scale;
    const double fov = 50.0 * kPi / 180.0;
    const double focal = 0.5 * image_size / std::tan(0.5 * fov);

    Rng rng(seed);
    const double phase = rng.uniform(0.0, 2.0 * kPi);

    std::vector<Camera> cams;
    cams.reserve(static_cast<std::size_t>(n_views));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_views; ++i) {
        // Fibonacci sphere, clamped away from the poles, with seeded jitter.
        double cos_el = 1.0 - 2.0 * (i + 0.5) / n_views;
        cos_el = std::clamp(cos_el, -0.95, 0.95);
        const double sin_el = std::sqrt(1.0 - cos_el * cos_el);
        const double az = phase + golden * i + rng.uniform(-0.05, 0.05);
        const double radius = base_radius * rng.uniform(0.95, 1.05);
        const Vec3 eye = target + radius * Vec3(sin_el * std::cos(az), sin_el * std::sin(az),
                                                cos_el);
        Camera cam;
        cam.id = i;
        cam.width = image_size;
        cam.height = image_size;
        cam.fx = cam.fy = focal;
        cam.cx = 0.5 * image_size;
        cam.cy = 0.5 * image_size;
        cam.world_to_camera = look_at(eye, target);
        cams.push_back(cam);
    }
    return cams;
}

EdgeMap oracle_render(const std::vector<ParametricCurve>& curves, const Camera& cam,
                      double line_width_px) {
    if (!(line_width_px >= 1.0)) {
        throw ConfigError("oracle_render: line width must be >= 1 px");
    }
    constexpr double kZNear = 1e-3;
    const int fw = 2 * cam.width;
    const int fh = 2 * cam.height;
    std::vector<unsigned char> fine(static_cast<std::size_t>(fw) * fh, 0);

    // Projection written out longhand; this renderer is the test oracle and
    // must stay independent of the splatting path.
    const Mat3 rot = cam.rotation();
    const Vec3 trans = cam.translation();
    auto project = [&](const Vec3& p, Vec2& out) -> bool {
        const Vec3 pc = rot * p + trans;
        if (!(pc.z() > kZNear)) {
            return false;
        }
        out = Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
        return true;
    };

    const double radius = 0.5 * line_width_px;  // coarse pixel units
    auto stamp_segment = [&](const Vec2& a, const Vec2& b) {
        const double x_lo = std::min(a.x(), b.x()) - radius;
        const double x_hi = std::max(a.x(), b.x()) + radius;
        const double y_lo = std::min(a.y(), b.y()) - radius;
        const double y_hi = std::max(a.y(), b.y()) + radius;
        // Fine pixel (fx, fy) has coarse-space center ((fx + 0.5)/2, ...).
        const int fx0 = std::max(0, static_cast<int>(std::floor(2.0 * x_lo - 0.5)));
        const int fx1 = std::min(fw - 1, static_cast<int>(std::ceil(2.0 * x_hi - 0.5)));
        const int fy0 = std::max(0, static_cast<int>(std::floor(2.0 * y_lo - 0.5)));
        const int fy1 = std::min(fh - 1, static_cast<int>(std::ceil(2.0 * y_hi - 0.5)));
        const Vec2 ab = b - a;
        const double len_sq = ab.squaredNorm();
        for (int fy = fy0; fy <= fy1; ++fy) {
            for (int fx = fx0; fx <= fx1; ++fx) {
                const Vec2 p((fx + 0.5) / 2.0, (fy + 0.5) / 2.0);
                double t = len_sq > 0.0 ? (p - a).dot(ab) / len_sq : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const Vec2 closest = a + t * ab;
                if ((p - closest).squaredNorm() <= radius * radius) {
                    fine[static_cast<std::size_t>(fy) * fw + fx] = 1;
                }
            }
        }
    };

    for (const auto& curve : curves) {
        // Estimate screen length from a coarse pass to pick the sample count.
        double screen_len = 0.0;
        {
            Vec2 prev;
            bool prev_ok = project(evaluate(curve.geometry, 0.0), prev);
            for (int i = 1; i <= 64; ++i) {
                Vec2 cur;
                const bool ok = project(evaluate(curve.geometry, i / 64.0), cur);
                if (ok && prev_ok) {
                    screen_len += (cur - prev).norm();
                }
                prev = cur;
                prev_ok = ok;
            }
        }
        const int count =
            std::clamp(static_cast<int>(std::ceil(4.0 * screen_len)), 64, 8192);
        Vec2 prev;
        bool prev_ok = project(evaluate(curve.geometry, 0.0), prev);
        for (int i = 1; i <= count; ++i) {
            Vec2 cur;
            const bool ok =
                project(evaluate(curve.geometry, static_cast<double>(i) / count), cur);
            if (ok && prev_ok) {
                stamp_segment(prev, cur);
            }
            prev = cur;
            prev_ok = ok;
        }
    }

    EdgeMap map(cam.width, cam.height, 0.0);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const int sum = fine[std::size_t(2 * y) * fw + 2 * x] +
                            fine[std::size_t(2 * y) * fw + 2 * x + 1] +
                            fine[std::size_t(2 * y + 1) * fw + 2 * x] +
                            fine[std::size_t(2 * y + 1) * fw + 2 * x + 1];
            map.at(x, y) = sum / 4.0;
        }
    }
    return map;
}

SyntheticScene make_scene(SceneKind kind, int n_views, int image_size, std::uint64_t seed,
                          double line_width_px) {
    SyntheticScene scene;
    scene.name = scene_kind_name(kind);
    scene.gt_curves.curves = make_gt_curves(kind);
    scene.gt_curves.rng_seed = seed;
    scene.gt_curves.bbox = curves_bounds(scene.gt_curves.curves);
    CurveId max_id = 0;
    for (const auto& c : scene.gt_curves.curves) {
        max_id = std::max(max_id, c.id + 1);
    }
    scene.gt_curves.next_id = max_id;

    scene.cameras = make_camera_ring(n_views, image_size, scene.gt_curves.bbox, seed);
    scene.edge_maps.reserve(scene.cameras.size());
    for (const auto& cam : scene.cameras) {
        scene.edge_maps.push_back(oracle_render(scene.gt_curves.curves, cam, line_width_px));
    }
    return scene;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticScene& scene) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "edges", ec);
    if (ec) {
        throw IoError("cannot create dataset directory: " + (dir / "edges").string());
    }
    save_cameras(dir / "cameras.json", scene.cameras);
    save_curves(dir / "gt_curves.json", scene.gt_curves.curves);
    char name[32];
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        std::snprintf(name, sizeof(name), "%03d.png", scene.cameras[i].id);
        save_edge_map(dir / "edges" / name, scene.edge_maps[i]);
    }
}

}  // namespace curvesplat
