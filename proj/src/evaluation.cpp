#include "curvesplat/evaluation.hpp"

#include "curvesplat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

namespace curvesplat {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) {
        return;
    }
    nodes_.reserve(2 * points_.size());
    nodes_.emplace_back();
    build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

void KdTree::build(std::uint32_t begin, std::uint32_t end, std::int32_t node) {
    constexpr std::uint32_t kLeafSize = 8;
    if (end - begin <= kLeafSize) {
        nodes_[node].axis = -1;
        nodes_[node].begin = begin;
        nodes_[node].end = end;
        return;
    }
    Vec3 lo = points_[begin], hi = points_[begin];
    for (std::uint32_t i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(points_[i]);
        hi = hi.cwiseMax(points_[i]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });

    nodes_[node].axis = axis;
    nodes_[node].split = points_[mid][axis];
    const auto left = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[node].left = left;
    nodes_[node].right = left + 1;
    build(begin, mid, left);
    build(mid, end, left + 1);
}

void KdTree::search(std::int32_t node, const Vec3& q, double& best) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            const double d = (q - points_[i]).squaredNorm();
            if (d < best) {
                best = d;
            }
        }
        return;
    }
    const double delta = q[n.axis] - n.split;
    const std::int32_t near = delta < 0.0 ? n.left : n.right;
    const std::int32_t far = delta < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (delta * delta < best) {
        search(far, q, best);
    }
}

double KdTree::nearest_sq(const Vec3& query) const {
    if (points_.empty()) {
        throw EmptyCloud("KdTree: empty point set");
    }
    double best = std::numeric_limits<double>::infinity();
    search(0, query, best);
    return best;
}

SampledEdgeCloud sample_curves(const std::vector<ParametricCurve>& curves, double resolution) {
    if (!(resolution > 0.0)) {
        throw Error("sample_curves: resolution must be positive");
    }
    std::vector<Vec3> raw;
    for (const auto& curve : curves) {
        const double len = arclength(curve.geometry);
        if (!(len > 0.0)) {
            raw.push_back(evaluate(curve.geometry, 0.5));
            continue;
        }
        const int count = static_cast<int>(std::ceil(len / resolution)) + 1;
        for (int i = 0; i < count; ++i) {
            raw.push_back(
                evaluate(curve.geometry, static_cast<double>(i) / static_cast<double>(count - 1)));
        }
    }

    // Voxel-centroid downsampling; ordered keys keep the output deterministic.
    std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::pair<Vec3, int>> voxels;
    for (const Vec3& p : raw) {
        const auto key = std::make_tuple(static_cast<std::int64_t>(std::floor(p.x() / resolution)),
                                         static_cast<std::int64_t>(std::floor(p.y() / resolution)),
                                         static_cast<std::int64_t>(std::floor(p.z() / resolution)));
        auto& [sum, count] = voxels[key];
        if (count == 0) {
            sum = Vec3::Zero();
        }
        sum += p;
        ++count;
    }

    SampledEdgeCloud cloud;
    cloud.sampling_resolution = resolution;
    cloud.points.reserve(voxels.size());
    for (const auto& [key, acc] : voxels) {
        cloud.points.push_back(acc.first / static_cast<double>(acc.second));
    }
    return cloud;
}

MetricsReport chamfer_metrics(const SampledEdgeCloud& pred, const SampledEdgeCloud& truth,
                              double tau) {
    if (pred.points.empty() || truth.points.empty()) {
        throw EmptyCloud("chamfer_metrics: empty point cloud");
    }
    const KdTree truth_tree(truth.points);
    const KdTree pred_tree(pred.points);

    MetricsReport rep;
    rep.tau = tau;
    const double tau_sq = tau * tau;

    std::size_t pred_hits = 0;
    double acc_sum = 0.0;
    for (const Vec3& p : pred.points) {
        const double d_sq = truth_tree.nearest_sq(p);
        acc_sum += std::sqrt(d_sq);
        if (d_sq <= tau_sq) {
            ++pred_hits;
        }
    }
    rep.accuracy = acc_sum / static_cast<double>(pred.points.size());
    rep.precision = 100.0 * static_cast<double>(pred_hits) / static_cast<double>(pred.points.size());

    std::size_t truth_hits = 0;
    double comp_sum = 0.0;
    for (const Vec3& p : truth.points) {
        const double d_sq = pred_tree.nearest_sq(p);
        comp_sum += std::sqrt(d_sq);
        if (d_sq <= tau_sq) {
            ++truth_hits;
        }
    }
    rep.completeness = comp_sum / static_cast<double>(truth.points.size());
    rep.recall = 100.0 * static_cast<double>(truth_hits) / static_cast<double>(truth.points.size());

    if (rep.precision > 0.0 && rep.recall > 0.0) {
        rep.fscore = 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall);
    }
    return rep;
}

MetricsReport evaluate_run(const std::vector<ParametricCurve>& final_curves,
                           const std::vector<ParametricCurve>& gt_curves, double tau,
                           double resolution) {
    const SampledEdgeCloud pred = sample_curves(final_curves, resolution);
    const SampledEdgeCloud truth = sample_curves(gt_curves, resolution);
    MetricsReport rep = chamfer_metrics(pred, truth, tau);
    rep.n_curves = static_cast<int>(final_curves.size());
    return rep;
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["completeness"] = report.completeness;
    j["recall"] = report.recall;
    j["precision"] = report.precision;
    j["fscore"] = report.fscore;
    j["tau"] = report.tau;
    j["n_curves"] = report.n_curves;
    return j.dump(2) + "\n";
}

std::string metrics_csv_header() {
    return "accuracy,completeness,recall,precision,fscore,tau,n_curves\n";
}

std::string metrics_to_csv_row(const MetricsReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", report.accuracy,
                  report.completeness, report.recall, report.precision, report.fscore, report.tau,
                  report.n_curves);
    return buf;
}

}  // namespace curvesplat
