#include "curvesplat/coupling.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace curvesplat;
using namespace curvesplat::test;

namespace {

// Linear functional of the coupling outputs; its analytic gradient is exactly
// what backprop_coupling returns.
double coupling_objective(const ParametricCurve& curve, const CouplingConfig& config,
                          const std::vector<GaussianGrads>& weights) {
    const auto gaussians = couple(curve, config);
    double value = 0.0;
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        value += weights[i].mean.dot(gaussians[i].mean);
        value += weights[i].frame.cwiseProduct(gaussians[i].frame).sum();
        value += weights[i].scales.dot(gaussians[i].scales);
        value += weights[i].opacity * gaussians[i].opacity;
        value += weights[i].mask * gaussians[i].mask;
    }
    return value;
}

std::vector<GaussianGrads> random_upstream(Rng& rng, int n) {
    std::vector<GaussianGrads> out(static_cast<std::size_t>(n));
    for (auto& g : out) {
        g.mean = random_point(rng);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                g.frame(r, c) = rng.uniform(-1.0, 1.0);
            }
        }
        g.scales = random_point(rng);
        g.opacity = rng.uniform(-1.0, 1.0);
        g.mask = rng.uniform(-1.0, 1.0);
    }
    return out;
}

void check_grad(double analytic, double fd, double tol_rel) {
    if (std::abs(analytic) <= 1e-8 && std::abs(fd) <= 1e-6) {
        return;
    }
    const double denom = std::max(std::abs(analytic), std::abs(fd));
    CHECK(std::abs(analytic - fd) / denom <= tol_rel);
}

}  // namespace

TEST_CASE("sample_parameters: midpoint rule") {
    const auto t12 = sample_parameters(12);
    REQUIRE(t12.size() == 12);
    CHECK(t12.front() == doctest::Approx(0.5 / 12.0).epsilon(1e-15));
    CHECK(t12.back() == doctest::Approx(11.5 / 12.0).epsilon(1e-15));
    for (std::size_t i = 1; i < t12.size(); ++i) {
        CHECK(t12[i] > t12[i - 1]);
    }
    const auto t2 = sample_parameters(2);
    CHECK(t2[0] == doctest::Approx(0.25));
    CHECK(t2[1] == doctest::Approx(0.75));
    const auto t1 = sample_parameters(1);
    CHECK(t1[0] == doctest::Approx(0.5));
}

TEST_CASE("build_frame: x tangent uses the global-z reference") {
    const Mat3 f = build_frame(Vec3(1, 0, 0));
    check_near(f.col(0), Vec3(1, 0, 0), 1e-15);
    check_near(f.col(1), Vec3(0, 0, 1), 1e-15);
    check_near(f.col(2), Vec3(0, -1, 0), 1e-15);  // v0 x v1, right-handed
    CHECK(f.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_frame: vertical tangent takes the fallback reference") {
    const Mat3 f = build_frame(Vec3(0, 0, 1));
    check_near(f.col(0), Vec3(0, 0, 1), 1e-15);
    check_near(f.col(1), Vec3(0, 1, 0), 1e-15);
    CHECK(f.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((f * f.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("build_frame: random tangents give orthonormal right-handed frames") {
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        Vec3 t = random_point(rng);
        if (t.norm() < 1e-6) {
            continue;
        }
        t.normalize();
        const Mat3 f = build_frame(t);
        CHECK((f.transpose() * f - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(f.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("couple: uniform line, rod scales and spacing") {
    CouplingConfig config;
    const auto curve = make_test_curve(
        0, LineSegment{Vec3(0, 0, 0), Vec3(12, 0, 0)}, config.samples_per_curve, 0.7, 0.1);
    const auto gs = couple(curve, config);
    REQUIRE(gs.size() == 12);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        check_near(gs[i].scales, Vec3(1.0, 0.1, 0.1), 1e-12);
        CHECK(gs[i].opacity == 0.7);
        CHECK(gs[i].sample_index == static_cast<int>(i));
        if (i > 0) {
            CHECK((gs[i].mean - gs[i - 1].mean).norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("couple: zero opacity is inherited") {
    CouplingConfig config;
    const auto curve =
        make_test_curve(0, CurveGeometry{arch_cubic()}, config.samples_per_curve, 0.0);
    for (const auto& g : couple(curve, config)) {
        CHECK(g.opacity == 0.0);
    }
}

TEST_CASE("couple: arch frames rotate smoothly") {
    CouplingConfig config;
    const auto curve = make_test_curve(0, CurveGeometry{arch_cubic()}, config.samples_per_curve);
    const auto gs = couple(curve, config);
    for (std::size_t i = 0; i + 1 < gs.size(); ++i) {
        const double cos_angle = gs[i].frame.col(0).dot(gs[i + 1].frame.col(0));
        CHECK(std::acos(std::clamp(cos_angle, -1.0, 1.0)) < 20.0 * std::numbers::pi / 180.0);
    }
}

TEST_CASE("couple: deterministic outputs") {
    CouplingConfig config;
    Rng rng(22);
    const auto curve = make_test_curve(3, CurveGeometry{random_cubic(rng)},
                                       config.samples_per_curve, 0.42, 0.05, 1.3);
    const auto a = couple(curve, config);
    const auto b = couple(curve, config);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mean == b[i].mean);
        CHECK(a[i].frame == b[i].frame);
        CHECK(a[i].scales == b[i].scales);
    }
}

TEST_CASE("couple: degenerate curve throws, couple_all flags it") {
    CouplingConfig config;
    config.tangent_eps = 1e-12;
    const auto degenerate =
        make_test_curve(7, LineSegment{Vec3(1, 1, 1), Vec3(1, 1, 1)}, config.samples_per_curve);
    CHECK_THROWS_AS(couple(degenerate, config), DegenerateCurve);

    const auto healthy =
        make_test_curve(8, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, config.samples_per_curve);
    const CoupledScene scene = couple_all({degenerate, healthy}, config);
    REQUIRE(scene.degenerate_curves.size() == 1);
    CHECK(scene.degenerate_curves[0] == 0);
    REQUIRE(scene.slices.size() == 1);
    CHECK(scene.slices[0].curve_index == 1);
    CHECK(scene.gaussians.size() == 12);
}

TEST_CASE("couple: mask logit count is enforced") {
    CouplingConfig config;
    auto curve = make_test_curve(0, CurveGeometry{arch_cubic()}, 5);
    CHECK_THROWS_AS(couple(curve, config), ShapeMismatch);
}

TEST_CASE("backprop_coupling: zero upstream gives zero gradients") {
    CouplingConfig config;
    const auto curve = make_test_curve(0, CurveGeometry{arch_cubic()}, config.samples_per_curve);
    const std::vector<GaussianGrads> zeros(12);
    const CurveGrads g = backprop_coupling(zeros, curve, config);
    for (const auto& p : g.control_points) {
        CHECK(p == Vec3::Zero());
    }
    CHECK(g.opacity == 0.0);
    CHECK(g.thickness == 0.0);
    for (const double m : g.mask_logits) {
        CHECK(m == 0.0);
    }
}

TEST_CASE("backprop_coupling: single mean gradient on a line splits linearly") {
    CouplingConfig config;
    const auto curve = make_test_curve(
        0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, config.samples_per_curve);
    std::vector<GaussianGrads> upstream(12);
    const Vec3 g(0.3, -0.2, 0.9);
    upstream[0].mean = g;
    const CurveGrads grads = backprop_coupling(upstream, curve, config);
    const double t0 = 0.5 / 12.0;
    check_near(grads.control_points[0], (1.0 - t0) * g, 1e-14);
    check_near(grads.control_points[1], t0 * g, 1e-14);
}

TEST_CASE("backprop_coupling: shape mismatch") {
    CouplingConfig config;
    const auto curve = make_test_curve(0, CurveGeometry{arch_cubic()}, config.samples_per_curve);
    CHECK_THROWS_AS(backprop_coupling(std::vector<GaussianGrads>(5), curve, config),
                    ShapeMismatch);
}

TEST_CASE("backprop_coupling: finite-difference check over random curves") {
    CouplingConfig config;
    Rng rng(23);
    const double h = 1e-6;
    int checked = 0;
    for (int trial = 0; trial < 25; ++trial) {
        ParametricCurve curve;
        if (trial % 3 == 2) {
            curve = make_test_curve(0, LineSegment{random_point(rng), random_point(rng)},
                                    config.samples_per_curve, rng.uniform(0.2, 0.9),
                                    rng.uniform(0.01, 0.1));
        } else {
            curve = make_test_curve(0, CurveGeometry{random_cubic(rng)}, config.samples_per_curve,
                                    rng.uniform(0.2, 0.9), rng.uniform(0.01, 0.1));
        }
        for (auto& logit : curve.mask_logits) {
            logit = rng.uniform(-2.0, 2.0);
        }
        // keep clear of the frame-reference switch and degenerate tangents
        bool usable = true;
        for (const double t : sample_parameters(config.samples_per_curve)) {
            const Vec3 d = derivative(curve.geometry, t);
            if (d.norm() < 1e-2 || std::abs(d.normalized().z()) > 0.99) {
                usable = false;
                break;
            }
        }
        if (!usable) {
            continue;
        }
        ++checked;

        const auto upstream = random_upstream(rng, config.samples_per_curve);
        const CurveGrads analytic = backprop_coupling(upstream, curve, config);

        const int n_ctrl = control_point_count(curve.geometry);
        for (int k = 0; k < n_ctrl; ++k) {
            for (int d = 0; d < 3; ++d) {
                ParametricCurve plus = curve, minus = curve;
                Vec3 p = control_point(curve.geometry, k);
                p[d] += h;
                set_control_point(plus.geometry, k, p);
                p[d] -= 2.0 * h;
                set_control_point(minus.geometry, k, p);
                const double fd = (coupling_objective(plus, config, upstream) -
                                   coupling_objective(minus, config, upstream)) /
                                  (2.0 * h);
                check_grad(analytic.control_points[static_cast<std::size_t>(k)][d], fd, 1e-3);
            }
        }
        {
            ParametricCurve plus = curve, minus = curve;
            plus.opacity += h;
            minus.opacity -= h;
            const double fd = (coupling_objective(plus, config, upstream) -
                               coupling_objective(minus, config, upstream)) /
                              (2.0 * h);
            check_grad(analytic.opacity, fd, 1e-3);
        }
        {
            ParametricCurve plus = curve, minus = curve;
            plus.thickness += h;
            minus.thickness -= h;
            const double fd = (coupling_objective(plus, config, upstream) -
                               coupling_objective(minus, config, upstream)) /
                              (2.0 * h);
            check_grad(analytic.thickness, fd, 1e-3);
        }
        for (int s = 0; s < config.samples_per_curve; ++s) {
            ParametricCurve plus = curve, minus = curve;
            plus.mask_logits[static_cast<std::size_t>(s)] += h;
            minus.mask_logits[static_cast<std::size_t>(s)] -= h;
            const double fd = (coupling_objective(plus, config, upstream) -
                               coupling_objective(minus, config, upstream)) /
                              (2.0 * h);
            check_grad(analytic.mask_logits[static_cast<std::size_t>(s)], fd, 1e-3);
        }
    }
    CHECK(checked >= 20);
}
