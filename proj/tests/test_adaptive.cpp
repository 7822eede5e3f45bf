#include "curvesplat/adaptive.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace curvesplat;
using namespace curvesplat::test;

namespace {

CurveSet make_set(std::vector<ParametricCurve> curves) {
    CurveSet set;
    CurveId next = 0;
    for (const auto& c : curves) {
        next = std::max(next, c.id + 1);
    }
    set.curves = std::move(curves);
    set.next_id = next;
    for (const auto& c : set.curves) {
        set.bbox.expand(geometry_bounds(c.geometry));
    }
    return set;
}

AdaptiveConfig test_config() {
    AdaptiveConfig c;
    c.tau_linearize = 0.01;
    c.tau_merge_dist = 0.05;
    c.tau_merge_fit = 0.01;
    return c;
}

const CubicBezier straight_x{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};

}  // namespace

TEST_CASE("linearize_pass: straight cubic becomes a segment, arch survives") {
    auto set = make_set({make_test_curve(0, CurveGeometry{straight_x}, 12),
                         make_test_curve(1, CurveGeometry{arch_cubic()}, 12),
                         make_test_curve(2, LineSegment{Vec3(0, 0, 0), Vec3(1, 1, 1)}, 12)});
    const auto events = linearize_pass(set, 0.01, 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::Linearize);
    CHECK(events[0].source == std::vector<CurveId>{0});
    CHECK(events[0].result == std::vector<CurveId>{0});
    CHECK(is_line(set.curves[0].geometry));
    check_near(std::get<LineSegment>(set.curves[0].geometry).p1, Vec3(3, 0, 0), 1e-12);
    CHECK(is_cubic(set.curves[1].geometry));
    CHECK(set.curves[0].mask_logits.size() == 12);
}

TEST_CASE("linearize_pass: replacement chord still tracks the original samples") {
    // gently curved cubic under the threshold
    const CubicBezier gentle{Vec3(0, 0, 0), Vec3(1, 0.004, 0), Vec3(2, 0.004, 0), Vec3(3, 0, 0)};
    auto set = make_set({make_test_curve(0, CurveGeometry{gentle}, 12)});
    const auto samples_before = sample_uniform(CurveGeometry{gentle}, 12);
    const auto events = linearize_pass(set, 0.01, 12);
    REQUIRE(events.size() == 1);
    const LineFit refit = fit_line(samples_before);
    CHECK(refit.mean_error < 0.01);
}

TEST_CASE("merge_pass: collinear touching segments merge, right angles do not") {
    auto set = make_set({make_test_curve(0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12),
                         make_test_curve(1, LineSegment{Vec3(1, 0, 0), Vec3(2, 0, 0)}, 12),
                         make_test_curve(2, LineSegment{Vec3(5, 0, 0), Vec3(6, 0, 0)}, 12),
                         make_test_curve(3, LineSegment{Vec3(6, 0, 0), Vec3(6, 1, 0)}, 12)});
    const auto events = merge_pass(set, test_config(), 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::MergeLines);
    CHECK(events[0].source == std::vector<CurveId>{0, 1});
    REQUIRE(set.curves.size() == 3);
    const auto* merged = set.find(events[0].result[0]);
    REQUIRE(merged != nullptr);
    const auto& seg = std::get<LineSegment>(merged->geometry);
    const double lo = std::min(seg.p0.x(), seg.p1.x());
    const double hi = std::max(seg.p0.x(), seg.p1.x());
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(2.0));
}

TEST_CASE("merge_pass: anti-parallel collinear segments still merge") {
    auto set = make_set({make_test_curve(0, LineSegment{Vec3(1, 0, 0), Vec3(0, 0, 0)}, 12),
                         make_test_curve(1, LineSegment{Vec3(1, 0, 0), Vec3(2, 0, 0)}, 12)});
    const auto events = merge_pass(set, test_config(), 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::MergeLines);
}

TEST_CASE("merge_pass: split halves of a cubic remerge almost exactly") {
    Rng rng(51);
    for (int trial = 0; trial < 5; ++trial) {
        const CubicBezier original = random_cubic(rng);
        const auto [left, right] = de_casteljau_split(original, rng.uniform(0.3, 0.7));
        auto set = make_set({make_test_curve(0, CurveGeometry{left}, 12, 0.4, 0.01),
                             make_test_curve(1, CurveGeometry{right}, 12, 0.8, 0.03)});
        AdaptiveConfig config = test_config();
        config.tau_merge_fit = 1e-6;
        const auto events = merge_pass(set, config, 12);
        REQUIRE(events.size() == 1);
        CHECK(events[0].kind == EventKind::MergeCubics);
        REQUIRE(set.curves.size() == 1);
        const auto& merged = set.curves[0];
        CHECK(merged.opacity == 0.8);                  // max of parents
        CHECK(merged.thickness == doctest::Approx(0.02));  // mean of parents
        // merged geometry reproduces the original curve (point-to-curve
        // distance via dense init + Newton refinement)
        auto distance_to = [&](const Vec3& p) {
            double best_t = 0.0;
            double best_d = 1e18;
            for (int k = 0; k <= 256; ++k) {
                const double t = k / 256.0;
                const double d = (evaluate(merged.geometry, t) - p).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_t = t;
                }
            }
            double t = best_t;
            for (int it = 0; it < 8; ++it) {
                const Vec3 r = evaluate(merged.geometry, t) - p;
                const Vec3 d1 = derivative(merged.geometry, t);
                const double denom = d1.squaredNorm();
                if (!(denom > 1e-30)) {
                    break;
                }
                t = std::clamp(t - r.dot(d1) / denom, 0.0, 1.0);
            }
            return (evaluate(merged.geometry, t) - p).norm();
        };
        for (const double t : {0.1, 0.35, 0.62, 0.9}) {
            CHECK(distance_to(evaluate(CurveGeometry{original}, t)) < 1e-4);
        }
    }
}

TEST_CASE("merge_pass: each curve merges at most once per pass") {
    auto set = make_set({make_test_curve(0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12),
                         make_test_curve(1, LineSegment{Vec3(1, 0, 0), Vec3(2, 0, 0)}, 12),
                         make_test_curve(2, LineSegment{Vec3(2, 0, 0), Vec3(3, 0, 0)}, 12)});
    const auto events = merge_pass(set, test_config(), 12);
    CHECK(events.size() == 1);
    CHECK(set.curves.size() == 2);
}

TEST_CASE("split_pass: straight line never splits geometrically") {
    CouplingConfig coupling;
    auto set = make_set({make_test_curve(0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12)});
    const auto coupled = couple_all(set.curves, coupling);
    const auto events = split_pass(set, coupled, test_config(), 12);
    CHECK(events.empty());
    CHECK(set.curves.size() == 1);
}

TEST_CASE("split_pass: sharp elbow triggers a geometric split at the corner") {
    CouplingConfig coupling;
    // elbow: tangent turns sharply around t = 0.5
    const CubicBezier elbow{Vec3(0, 0, 0), Vec3(1, 3, 0), Vec3(1, 3, 0), Vec3(2, 0, 0)};
    auto set = make_set({make_test_curve(7, CurveGeometry{elbow}, 12)});
    const auto coupled = couple_all(set.curves, coupling);

    double max_angle = 0.0;
    for (int i = 0; i + 1 < 12; ++i) {
        const double c =
            coupled.gaussians[i].frame.col(0).dot(coupled.gaussians[i + 1].frame.col(0));
        max_angle = std::max(max_angle, std::acos(std::clamp(c, -1.0, 1.0)));
    }
    REQUIRE(max_angle > 30.0 * std::numbers::pi / 180.0);

    auto config = test_config();
    const auto events = split_pass(set, coupled, config, 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::SplitGeometric);
    CHECK(events[0].source == std::vector<CurveId>{7});
    REQUIRE(set.curves.size() == 2);
    // children join where the parent was cut and cover it exactly
    const Vec3 junction_a = end_point(set.curves[0].geometry);
    const Vec3 junction_b = start_point(set.curves[1].geometry);
    check_near(junction_a, junction_b, 1e-12);
    check_near(start_point(set.curves[0].geometry), Vec3(0, 0, 0), 1e-12);
    check_near(end_point(set.curves[1].geometry), Vec3(2, 0, 0), 1e-12);
}

TEST_CASE("split_pass: split children sample the parent exactly") {
    CouplingConfig coupling;
    const CubicBezier elbow{Vec3(0, 0, 0), Vec3(1, 3, 0), Vec3(1, 3, 0), Vec3(2, 0, 0)};
    auto set = make_set({make_test_curve(0, CurveGeometry{elbow}, 12)});
    const auto coupled = couple_all(set.curves, coupling);
    split_pass(set, coupled, test_config(), 12);
    REQUIRE(set.curves.size() == 2);
    const Vec3 junction = end_point(set.curves[0].geometry);
    // locate the split parameter on the parent, then check both halves
    double s_star = 0.5;
    double best = 1e9;
    for (int k = 1; k < 512; ++k) {
        const double s = k / 512.0;
        const double d = (evaluate(CurveGeometry{elbow}, s) - junction).norm();
        if (d < best) {
            best = d;
            s_star = s;
        }
    }
    for (const double u : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        check_near(evaluate(set.curves[0].geometry, u), evaluate(CurveGeometry{elbow}, s_star * u),
                   1e-3);
        check_near(evaluate(set.curves[1].geometry, u),
                   evaluate(CurveGeometry{elbow}, s_star + u * (1.0 - s_star)), 1e-3);
    }
}

TEST_CASE("split_pass: low-mask Gaussian cuts out its span") {
    CouplingConfig coupling;
    auto curve = make_test_curve(3, CurveGeometry{straight_x}, 12);
    curve.mask_logits[5] = -10.0;  // sigmoid ~ 4.5e-5
    auto set = make_set({curve});
    auto config = test_config();
    config.theta_split = 10.0;  // disable geometric splitting
    const auto coupled = couple_all(set.curves, coupling);
    const auto events = split_pass(set, coupled, config, 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::SplitLowMask);
    REQUIRE(set.curves.size() == 2);

    const auto params = sample_parameters(12);
    check_near(end_point(set.curves[0].geometry),
               evaluate(CurveGeometry{straight_x}, params[4]), 1e-12);
    check_near(start_point(set.curves[1].geometry),
               evaluate(CurveGeometry{straight_x}, params[6]), 1e-12);
}

TEST_CASE("split_pass: low-mask at the ends keeps a single piece") {
    CouplingConfig coupling;
    auto curve = make_test_curve(3, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12);
    curve.mask_logits[0] = -10.0;
    auto set = make_set({curve});
    auto config = test_config();
    config.theta_split = 10.0;
    const auto coupled = couple_all(set.curves, coupling);
    const auto events = split_pass(set, coupled, config, 12);
    REQUIRE(events.size() == 1);
    CHECK(events[0].result.size() == 1);
    REQUIRE(set.curves.size() == 1);
    const auto params = sample_parameters(12);
    check_near(start_point(set.curves[0].geometry), Vec3(params[1], 0, 0), 1e-12);
}

TEST_CASE("prune_pass: opacity, mask, and degeneracy rules") {
    auto transparent = make_test_curve(0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12, 0.001);
    auto masked = make_test_curve(1, LineSegment{Vec3(2, 0, 0), Vec3(3, 0, 0)}, 12, 0.9);
    for (auto& logit : masked.mask_logits) {
        logit = -6.0;  // sigmoid ~ 0.0025 < 0.01
    }
    auto healthy = make_test_curve(2, LineSegment{Vec3(4, 0, 0), Vec3(5, 0, 0)}, 12, 0.8);
    auto degenerate = make_test_curve(3, LineSegment{Vec3(6, 0, 0), Vec3(6, 0, 0)}, 12, 0.8);

    auto set = make_set({transparent, masked, healthy, degenerate});
    const auto events = prune_pass(set, test_config(), 12, 1e-9);
    REQUIRE(events.size() == 3);
    CHECK(events[0].kind == EventKind::PruneOpacity);
    CHECK(events[1].kind == EventKind::PruneMask);
    CHECK(events[2].kind == EventKind::PruneDegenerate);
    REQUIRE(set.curves.size() == 1);
    CHECK(set.curves[0].id == 2);
}

TEST_CASE("prune_pass: never removes a healthy curve") {
    Rng rng(52);
    std::vector<ParametricCurve> curves;
    for (int i = 0; i < 20; ++i) {
        auto c = make_test_curve(static_cast<CurveId>(i), CurveGeometry{random_cubic(rng)}, 12,
                                 rng.uniform(0.06, 1.0));
        c.mask_logits[rng.uniform_int(12)] = 3.0;  // at least one mask above threshold
        curves.push_back(c);
    }
    auto set = make_set(curves);
    const auto events = prune_pass(set, test_config(), 12, 1e-12);
    CHECK(events.empty());
    CHECK(set.curves.size() == 20);
}

TEST_CASE("run_schedule: gates by iteration") {
    CouplingConfig coupling;
    AdaptiveConfig config = test_config();

    auto fresh_set = [&]() {
        return make_set({make_test_curve(0, CurveGeometry{straight_x}, 12, 0.9),
                         make_test_curve(1, LineSegment{Vec3(0, 1, 0), Vec3(1, 1, 0)}, 12, 0.9),
                         make_test_curve(2, LineSegment{Vec3(1, 1, 0), Vec3(2, 1, 0)}, 12, 0.9),
                         make_test_curve(3, LineSegment{Vec3(0, 2, 0), Vec3(1, 2, 0)}, 12, 0.001)});
    };

    // before linearize_start: nothing happens, opacity still learnable
    {
        auto set = fresh_set();
        const auto res = run_schedule(2500, set, config, coupling);
        CHECK(res.events.empty());
        CHECK(res.flags.opacity_learnable);
        CHECK_FALSE(res.flags.mask_loss_active);
        CHECK(set.curves.size() == 4);
    }
    // at 2999: not an op iteration even past linearize_start
    {
        auto set = fresh_set();
        CHECK(run_schedule(2999, set, config, coupling).events.empty());
    }
    // at 3000: linearize fires, but no merge/split/prune yet
    {
        auto set = fresh_set();
        const auto res = run_schedule(3000, set, config, coupling);
        REQUIRE(res.events.size() == 1);
        CHECK(res.events[0].kind == EventKind::Linearize);
        CHECK(res.events[0].iteration == 3000);
        CHECK(set.curves.size() == 4);  // transparent curve not pruned yet
    }
    // at 8000: all passes active, opacity frozen, mask loss on
    {
        auto set = fresh_set();
        const auto res = run_schedule(8000, set, config, coupling);
        CHECK_FALSE(res.flags.opacity_learnable);
        CHECK(res.flags.mask_loss_active);
        bool saw_linearize = false, saw_merge = false, saw_prune = false;
        for (const auto& e : res.events) {
            saw_linearize |= e.kind == EventKind::Linearize;
            saw_merge |= e.kind == EventKind::MergeLines;
            saw_prune |= e.kind == EventKind::PruneOpacity;
        }
        CHECK(saw_linearize);
        CHECK(saw_merge);
        CHECK(saw_prune);
    }
}

TEST_CASE("run_schedule: event replay reproduces the final id set") {
    CouplingConfig coupling;
    AdaptiveConfig config = test_config();
    Rng rng(53);

    auto set = make_set({});
    for (int i = 0; i < 12; ++i) {
        auto c = make_test_curve(set.allocate_id(), CurveGeometry{random_cubic(rng)}, 12,
                                 rng.uniform(0.0, 1.0));
        for (auto& logit : c.mask_logits) {
            logit = rng.uniform(-6.0, 3.0);
        }
        set.curves.push_back(std::move(c));
    }
    std::set<CurveId> initial;
    for (const auto& c : set.curves) {
        initial.insert(c.id);
    }

    std::vector<TopologyEvent> all_events;
    for (const int iter : {3000, 4000, 7000, 8000, 9000, 10000}) {
        auto res = run_schedule(iter, set, config, coupling);
        all_events.insert(all_events.end(), res.events.begin(), res.events.end());
    }

    const std::set<CurveId> replayed = replay_events(initial, all_events);
    std::set<CurveId> actual;
    for (const auto& c : set.curves) {
        actual.insert(c.id);
    }
    CHECK(replayed == actual);
}

TEST_CASE("event_to_json: stable line format") {
    const TopologyEvent e{4000, EventKind::MergeLines, {3, 9}, {17}};
    CHECK(event_to_json(e) ==
          R"({"iteration":4000,"kind":"MergeLines","result":[17],"source":[3,9]})");
}
