#pragma once

#include "curvesplat/coupling.hpp"
#include "curvesplat/curve.hpp"
#include "curvesplat/edge_map.hpp"
#include "curvesplat/types.hpp"

#include <vector>

namespace curvesplat {

struct LossWeights {
    double conn = 0.1;        // lambda_1
    double smoothness = 0.01; // lambda_2
    double opacity_reg = 0.01;// lambda_3
    double mask = 0.05;       // lambda_4
    double eta = 0.1;         // edge/non-edge pixel threshold
    double tau_conn = 0.02;   // endpoint-proximity radius, scene units
};

struct LossReport {
    double total = 0.0;
    double edge = 0.0;
    double conn = 0.0;
    double smo = 0.0;
    double reg = 0.0;
    double mask = 0.0;
};

struct EdgeLossResult {
    double value = 0.0;
    std::vector<double> grad;  // per rendered pixel
    bool degenerate = false;   // one pixel class was empty; plain MSE was used
};

/// Class-balanced squared error: edge pixels of the truth map (> eta) are
/// weighted by the non-edge count and vice versa. Falls back to plain MSE
/// when one class is empty.
EdgeLossResult edge_loss(const EdgeMap& rendered, const EdgeMap& truth, double eta);

struct ConnectionLossResult {
    double value = 0.0;
    // gradient per curve, per endpoint control point (first and last)
    std::vector<Vec3> grad_start;
    std::vector<Vec3> grad_end;
};

/// Attracts endpoint pairs of distinct curves that are already within
/// tau_conn of each other; the indicator is constant during backward.
ConnectionLossResult connection_loss(const std::vector<ParametricCurve>& curves, double tau_conn);

struct SmoothnessLossResult {
    double value = 0.0;
    // gradient on each Gaussian's principal axis, aligned with `gaussians`
    std::vector<Vec3> grad_axis;
};

/// Sum of squared differences between consecutive principal axes along each
/// curve, sign-aligned so stored frame orientation cannot be penalized.
SmoothnessLossResult smoothness_loss(const CoupledScene& coupled);

struct ScalarGradLossResult {
    double value = 0.0;
    std::vector<double> grad;  // one entry per curve
};

/// sum_j log(1 + o_j^2 / 0.5)
ScalarGradLossResult opacity_regularizer(const std::vector<ParametricCurve>& curves);

struct MaskLossResult {
    double value = 0.0;
    // dL/d(mask value) per Gaussian of the coupled scene; the sigmoid
    // derivative is applied by backprop_coupling
    std::vector<double> grad_mask;
};

/// Mean sigmoid mask over every coupled Gaussian.
MaskLossResult mask_loss(const CoupledScene& coupled);

struct TotalLossResult {
    LossReport report;
    std::vector<double> grad_image;       // dL/d rendered pixel
    std::vector<GaussianGrads> grad_gaussians;  // smoothness + mask terms
    std::vector<Vec3> grad_start;         // weighted connection gradients
    std::vector<Vec3> grad_end;
    std::vector<double> grad_opacity;     // weighted opacity-regularizer gradients
};

/// Weighted sum per Eq-style contract: total = edge + l1 conn + l2 smo +
/// l3 reg + l4 mask. Gradients are pre-multiplied by their weights.
TotalLossResult total_loss(const EdgeMap& rendered, const EdgeMap& truth,
                           const std::vector<ParametricCurve>& curves,
                           const CoupledScene& coupled, const LossWeights& weights);

}  // namespace curvesplat
