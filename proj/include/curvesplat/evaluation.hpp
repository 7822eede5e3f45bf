#pragma once

#include "curvesplat/curve.hpp"
#include "curvesplat/types.hpp"

#include <string>
#include <vector>

namespace curvesplat {

struct SampledEdgeCloud {
    std::vector<Vec3> points;
    double sampling_resolution = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;      // mean pred->truth distance, scene units
    double completeness = 0.0;  // mean truth->pred distance
    double recall = 0.0;        // % of truth points within tau of pred
    double precision = 0.0;     // % of pred points within tau of truth
    double fscore = 0.0;
    double tau = 0.0;
    int n_curves = 0;
};

/// Exact nearest-neighbor index over a fixed point set.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);
    /// Squared distance to the nearest stored point.
    double nearest_sq(const Vec3& query) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int axis = -1;  // -1 = leaf
        double split = 0.0;
        std::uint32_t begin = 0, end = 0;  // leaf point range
        std::int32_t left = -1, right = -1;
    };
    void build(std::uint32_t begin, std::uint32_t end, std::int32_t node);
    void search(std::int32_t node, const Vec3& q, double& best) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
};

/// Sample curves proportionally to their arclength (polyline approximation),
/// then voxel-grid downsample at the same resolution keeping one centroid per
/// occupied voxel.
SampledEdgeCloud sample_curves(const std::vector<ParametricCurve>& curves, double resolution);

/// Chamfer metrics with exact nearest-neighbor queries. Throws EmptyCloud.
MetricsReport chamfer_metrics(const SampledEdgeCloud& pred, const SampledEdgeCloud& truth,
                              double tau);

MetricsReport evaluate_run(const std::vector<ParametricCurve>& final_curves,
                           const std::vector<ParametricCurve>& gt_curves, double tau,
                           double resolution);

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_csv_header();
std::string metrics_to_csv_row(const MetricsReport& report);

}  // namespace curvesplat
