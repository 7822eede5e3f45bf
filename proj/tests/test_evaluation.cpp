#include "curvesplat/evaluation.hpp"

#include "curvesplat/scene_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace curvesplat;
using namespace curvesplat::test;

namespace {

// O(n^2) reference, written to use the same distance expression as the tree.
MetricsReport brute_force_metrics(const SampledEdgeCloud& pred, const SampledEdgeCloud& truth,
                                  double tau) {
    MetricsReport rep;
    rep.tau = tau;
    const double tau_sq = tau * tau;
    std::size_t pred_hits = 0;
    double acc = 0.0;
    for (const Vec3& p : pred.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : truth.points) {
            best = std::min(best, (p - q).squaredNorm());
        }
        acc += std::sqrt(best);
        if (best <= tau_sq) {
            ++pred_hits;
        }
    }
    rep.accuracy = acc / static_cast<double>(pred.points.size());
    rep.precision = 100.0 * static_cast<double>(pred_hits) / static_cast<double>(
        pred.points.size());
    std::size_t truth_hits = 0;
    double comp = 0.0;
    for (const Vec3& q : truth.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : pred.points) {
            best = std::min(best, (q - p).squaredNorm());
        }
        comp += std::sqrt(best);
        if (best <= tau_sq) {
            ++truth_hits;
        }
    }
    rep.completeness = comp / static_cast<double>(truth.points.size());
    rep.recall = 100.0 * static_cast<double>(truth_hits) / static_cast<double>(
        truth.points.size());
    if (rep.precision > 0.0 && rep.recall > 0.0) {
        rep.fscore = 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall);
    }
    return rep;
}

SampledEdgeCloud random_cloud(Rng& rng, std::size_t count, double scale = 1.0) {
    SampledEdgeCloud cloud;
    cloud.sampling_resolution = 0.01;
    for (std::size_t i = 0; i < count; ++i) {
        cloud.points.push_back(scale * random_point(rng));
    }
    return cloud;
}

}  // namespace

TEST_CASE("sample_curves: unit segment at resolution 0.1") {
    const auto curve = make_test_curve(0, LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 12);
    const auto cloud = sample_curves({curve}, 0.1);
    CHECK(cloud.points.size() >= 9);
    CHECK(cloud.points.size() <= 11);
    for (const Vec3& p : cloud.points) {
        CHECK(std::abs(p.y()) < 1e-12);
        CHECK(p.x() >= -1e-12);
        CHECK(p.x() <= 1.0 + 1e-12);
    }
}

TEST_CASE("sample_curves: zero-length curve gives one point") {
    const auto curve = make_test_curve(0, LineSegment{Vec3(1, 2, 3), Vec3(1, 2, 3)}, 12);
    const auto cloud = sample_curves({curve}, 0.1);
    REQUIRE(cloud.points.size() == 1);
    check_near(cloud.points[0], Vec3(1, 2, 3), 1e-12);
}

TEST_CASE("sample_curves: circle coverage at the requested resolution") {
    const auto gt = make_gt_curves(SceneKind::Circle);
    const double res = 0.05;
    const auto cloud = sample_curves(gt, res);
    // every dense circle point must have a cloud point within ~2 voxel diagonals
    for (int k = 0; k < 720; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 720.0;
        const Vec3 p(0.5 * std::cos(a), 0.5 * std::sin(a), 0.0);
        double best = 1e18;
        for (const Vec3& q : cloud.points) {
            best = std::min(best, (p - q).norm());
        }
        CHECK(best <= 2.0 * res);
    }
}

TEST_CASE("chamfer_metrics: identical clouds are perfect") {
    Rng rng(61);
    const auto cloud = random_cloud(rng, 100);
    const auto rep = chamfer_metrics(cloud, cloud, 0.01);
    CHECK(rep.accuracy == 0.0);
    CHECK(rep.completeness == 0.0);
    CHECK(rep.recall == 100.0);
    CHECK(rep.precision == 100.0);
    CHECK(rep.fscore == 100.0);
}

TEST_CASE("chamfer_metrics: rigid shift below tau") {
    Rng rng(62);
    const auto truth = random_cloud(rng, 80);
    const double delta = 0.004;
    SampledEdgeCloud pred = truth;
    for (auto& p : pred.points) {
        p += Vec3(delta, 0, 0);
    }
    const auto rep = chamfer_metrics(pred, truth, 0.01);
    CHECK(rep.accuracy == doctest::Approx(delta).epsilon(1e-9));
    CHECK(rep.completeness == doctest::Approx(delta).epsilon(1e-9));
    CHECK(rep.fscore == 100.0);
}

TEST_CASE("chamfer_metrics: tau = 0 only counts exact coincidences") {
    Rng rng(63);
    const auto truth = random_cloud(rng, 40);
    SampledEdgeCloud pred = truth;
    pred.points[0] += Vec3(1e-6, 0, 0);
    const auto rep = chamfer_metrics(pred, truth, 0.0);
    CHECK(rep.precision == doctest::Approx(100.0 * 39.0 / 40.0));
}

TEST_CASE("chamfer_metrics: equals the brute-force oracle exactly") {
    Rng rng(64);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pred = random_cloud(rng, 1 + rng.uniform_int(300));
        const auto truth = random_cloud(rng, 1 + rng.uniform_int(300));
        const double tau = rng.uniform(0.05, 0.8);
        const MetricsReport fast = chamfer_metrics(pred, truth, tau);
        const MetricsReport slow = brute_force_metrics(pred, truth, tau);
        CHECK(fast.accuracy == slow.accuracy);
        CHECK(fast.completeness == slow.completeness);
        CHECK(fast.recall == slow.recall);
        CHECK(fast.precision == slow.precision);
        CHECK(fast.fscore == slow.fscore);
    }
}

TEST_CASE("chamfer_metrics: swapping roles swaps the paired fields") {
    Rng rng(65);
    const auto a = random_cloud(rng, 120);
    const auto b = random_cloud(rng, 90);
    const auto ab = chamfer_metrics(a, b, 0.3);
    const auto ba = chamfer_metrics(b, a, 0.3);
    CHECK(ab.accuracy == ba.completeness);
    CHECK(ab.completeness == ba.accuracy);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
}

TEST_CASE("chamfer_metrics: recall/precision/fscore are non-decreasing in tau") {
    Rng rng(66);
    const auto a = random_cloud(rng, 100);
    const auto b = random_cloud(rng, 100);
    MetricsReport prev;
    bool first = true;
    for (const double tau : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        const auto rep = chamfer_metrics(a, b, tau);
        if (!first) {
            CHECK(rep.recall >= prev.recall);
            CHECK(rep.precision >= prev.precision);
            CHECK(rep.fscore >= prev.fscore);
        }
        prev = rep;
        first = false;
    }
}

TEST_CASE("chamfer_metrics: scale covariance") {
    Rng rng(67);
    const auto a = random_cloud(rng, 60);
    const auto b = random_cloud(rng, 70);
    const double tau = 0.2;
    const double s = 3.5;
    SampledEdgeCloud as = a, bs = b;
    for (auto& p : as.points) {
        p *= s;
    }
    for (auto& p : bs.points) {
        p *= s;
    }
    const auto base = chamfer_metrics(a, b, tau);
    const auto scaled = chamfer_metrics(as, bs, s * tau);
    CHECK(scaled.accuracy == doctest::Approx(s * base.accuracy).epsilon(1e-9));
    CHECK(scaled.completeness == doctest::Approx(s * base.completeness).epsilon(1e-9));
    CHECK(scaled.recall == base.recall);
    CHECK(scaled.precision == base.precision);
}

TEST_CASE("chamfer_metrics: empty clouds are rejected") {
    Rng rng(68);
    const auto a = random_cloud(rng, 10);
    CHECK_THROWS_AS(chamfer_metrics(SampledEdgeCloud{}, a, 0.1), EmptyCloud);
    CHECK_THROWS_AS(chamfer_metrics(a, SampledEdgeCloud{}, 0.1), EmptyCloud);
}

TEST_CASE("evaluate_run: cube against itself") {
    const auto gt = make_gt_curves(SceneKind::Cube);
    const auto rep = evaluate_run(gt, gt, 0.017, 0.0087);
    CHECK(rep.accuracy == 0.0);
    CHECK(rep.completeness == 0.0);
    CHECK(rep.fscore == 100.0);
    CHECK(rep.n_curves == 12);
}

TEST_CASE("metrics report serialization") {
    MetricsReport rep;
    rep.accuracy = 0.5;
    rep.n_curves = 7;
    const std::string j = metrics_to_json(rep);
    CHECK(j.find("\"n_curves\": 7") != std::string::npos);
    const std::string csv = metrics_to_csv_row(rep);
    CHECK(csv.find("0.5,") == 0);
}
