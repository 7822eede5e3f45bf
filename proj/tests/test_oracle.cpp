#include "curvesplat/scene_oracle.hpp"

#include "curvesplat/curve_io.hpp"
#include "curvesplat/splat_render.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace curvesplat;
using namespace curvesplat::test;

TEST_CASE("make_gt_curves: cube has 12 edges meeting at 8 corners") {
    const auto cube = make_gt_curves(SceneKind::Cube);
    REQUIRE(cube.size() == 12);
    std::map<std::array<long, 3>, int> corner_use;
    for (const auto& c : cube) {
        CHECK(is_line(c.geometry));
        for (const Vec3& p : {start_point(c.geometry), end_point(c.geometry)}) {
            corner_use[{std::lround(p.x() * 10), std::lround(p.y() * 10),
                        std::lround(p.z() * 10)}]++;
        }
    }
    CHECK(corner_use.size() == 8);
    for (const auto& [corner, uses] : corner_use) {
        CHECK(uses == 3);
    }
}

TEST_CASE("make_gt_curves: circle approximation error stays below 3e-4 of radius") {
    const auto circle = make_gt_curves(SceneKind::Circle);
    REQUIRE(circle.size() == 4);
    const double radius = 0.5;
    double worst = 0.0;
    for (const auto& c : circle) {
        CHECK(is_cubic(c.geometry));
        for (int k = 0; k <= 500; ++k) {
            const Vec3 p = evaluate(c.geometry, k / 500.0);
            worst = std::max(worst, std::abs(p.head<2>().norm() - radius));
            CHECK(std::abs(p.z()) < 1e-12);
        }
    }
    CHECK(worst < 3e-4 * radius);
}

TEST_CASE("make_gt_curves: helix is six chained cubics") {
    const auto helix = make_gt_curves(SceneKind::Helix);
    REQUIRE(helix.size() == 6);
    for (std::size_t i = 0; i + 1 < helix.size(); ++i) {
        check_near(end_point(helix[i].geometry), start_point(helix[i + 1].geometry), 1e-12);
    }
    CHECK(start_point(helix.front().geometry).z() < end_point(helix.back().geometry).z());
}

TEST_CASE("make_scene: deterministic for a fixed seed") {
    const auto a = make_scene(SceneKind::Cube, 4, 48, 99);
    const auto b = make_scene(SceneKind::Cube, 4, 48, 99);
    REQUIRE(a.cameras.size() == b.cameras.size());
    for (std::size_t i = 0; i < a.cameras.size(); ++i) {
        CHECK(a.cameras[i].world_to_camera == b.cameras[i].world_to_camera);
        CHECK(a.edge_maps[i].values == b.edge_maps[i].values);
    }
    const auto c = make_scene(SceneKind::Cube, 4, 48, 100);
    CHECK(a.cameras[0].world_to_camera != c.cameras[0].world_to_camera);
}

TEST_CASE("make_scene: ground truth projects inside every view") {
    const auto scene = make_scene(SceneKind::Mixed, 6, 64, 3);
    for (const auto& cam : scene.cameras) {
        for (const auto& curve : scene.gt_curves.curves) {
            for (const Vec3& p : sample_uniform(curve.geometry, 9)) {
                const Vec3 pc = cam.to_camera(p);
                REQUIRE(pc.z() > 0.0);
                const double u = cam.fx * pc.x() / pc.z() + cam.cx;
                const double v = cam.fy * pc.y() / pc.z() + cam.cy;
                CHECK(u >= 0.0);
                CHECK(u <= cam.width);
                CHECK(v >= 0.0);
                CHECK(v <= cam.height);
            }
        }
    }
}

TEST_CASE("oracle_render: behind-camera curves leave a blank map") {
    Camera cam;
    cam.width = cam.height = 32;
    cam.fx = cam.fy = 40;
    cam.cx = cam.cy = 16;
    cam.world_to_camera = look_at(Vec3(0, 0, -3), Vec3(0, 0, -10));
    const auto curve = make_test_curve(0, LineSegment{Vec3(0, 0, 5), Vec3(1, 0, 5)}, 12);
    const EdgeMap map = oracle_render({curve}, cam, 2.0);
    for (const double v : map.values) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("oracle_render: centered segment draws a bright run of pixels") {
    Camera cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 80;
    cam.cx = cam.cy = 32;
    cam.world_to_camera = look_at(Vec3(0, 0, 2.5), Vec3(0, 0, 0), Vec3(0, 1, 0));
    const auto curve = make_test_curve(0, LineSegment{Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)}, 12);
    const EdgeMap map = oracle_render({curve}, cam, 2.0);

    int full_pixels = 0;
    for (const double v : map.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (v == 1.0) {
            ++full_pixels;
        }
    }
    CHECK(full_pixels > 20);
    // width ~ 2 px: column through the middle has about 2 bright pixels
    int bright_in_column = 0;
    for (int y = 0; y < 64; ++y) {
        if (map.at(32, y) > 0.5) {
            ++bright_in_column;
        }
    }
    CHECK(bright_in_column >= 1);
    CHECK(bright_in_column <= 4);
}

TEST_CASE("oracle_render: projected samples land on the drawn ridge") {
    const auto scene = make_scene(SceneKind::Cube, 3, 96, 5);
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const Camera& cam = scene.cameras[v];
        const EdgeMap& map = scene.edge_maps[v];
        for (const auto& curve : scene.gt_curves.curves) {
            for (const Vec3& p : sample_uniform(curve.geometry, 7)) {
                const Vec3 pc = cam.to_camera(p);
                const double u = cam.fx * pc.x() / pc.z() + cam.cx;
                const double w = cam.fy * pc.y() / pc.z() + cam.cy;
                // some pixel within 1 px of the projection carries stroke value
                double best = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int x = static_cast<int>(u) + dx;
                        const int y = static_cast<int>(w) + dy;
                        if (x >= 0 && x < map.width && y >= 0 && y < map.height) {
                            best = std::max(best, map.at(x, y));
                        }
                    }
                }
                CHECK(best >= 0.5);
            }
        }
    }
}

TEST_CASE("oracle_render vs splat_render: binarized maps overlap on the cube") {
    const auto scene = make_scene(SceneKind::Cube, 2, 128, 8);
    CouplingConfig coupling;
    coupling.tangent_eps = 1e-9 * scene.gt_curves.bbox.diagonal();
    auto curves = scene.gt_curves.curves;
    for (auto& c : curves) {
        ensure_mask_logits(c, coupling.samples_per_curve, 40.0);
        c.thickness = 0.01;
        c.opacity = 1.0;
    }
    const CoupledScene coupled = couple_all(curves, coupling);
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const RenderOutput out = render(coupled.gaussians, scene.cameras[v]);
        const EdgeMap& oracle = scene.edge_maps[v];
        std::size_t inter = 0, uni = 0;
        for (std::size_t p = 0; p < oracle.values.size(); ++p) {
            const bool a = oracle.values[p] > 0.1;
            const bool b = out.image.values[p] > 0.1;
            inter += a && b;
            uni += a || b;
        }
        REQUIRE(uni > 0);
        const double iou = static_cast<double>(inter) / static_cast<double>(uni);
        CHECK(iou > 0.5);
    }
}

TEST_CASE("write_dataset: produces the training layout") {
    const auto scene = make_scene(SceneKind::Circle, 3, 32, 1);
    const auto dir = std::filesystem::temp_directory_path() / "curvesplat_test_dataset";
    std::filesystem::remove_all(dir);
    write_dataset(dir, scene);
    CHECK(std::filesystem::exists(dir / "cameras.json"));
    CHECK(std::filesystem::exists(dir / "gt_curves.json"));
    CHECK(std::filesystem::exists(dir / "edges" / "000.png"));
    CHECK(std::filesystem::exists(dir / "edges" / "002.png"));
    std::filesystem::remove_all(dir);
}
