#include "curvesplat/losses.hpp"

#include "curvesplat/errors.hpp"
#include "curvesplat/log.hpp"

#include <cmath>

namespace curvesplat {

EdgeLossResult edge_loss(const EdgeMap& rendered, const EdgeMap& truth, double eta) {
    if (rendered.width != truth.width || rendered.height != truth.height) {
        throw DimensionMismatch("edge_loss: rendered and truth dimensions differ");
    }
    const std::size_t total = truth.pixel_count();
    std::size_t n_edge = 0;
    for (const double v : truth.values) {
        if (v > eta) {
            ++n_edge;
        }
    }
    const std::size_t n_non_edge = total - n_edge;

    EdgeLossResult res;
    res.grad.assign(total, 0.0);

    if (n_edge == 0 || n_non_edge == 0) {
        res.degenerate = true;
        log::debug("edge_loss: single-class truth map, using plain MSE");
        const double w = 1.0 / static_cast<double>(total);
        for (std::size_t i = 0; i < total; ++i) {
            const double diff = rendered.values[i] - truth.values[i];
            res.value += w * diff * diff;
            res.grad[i] = 2.0 * w * diff;
        }
        return res;
    }

    const double w_non_edge = static_cast<double>(n_edge) / static_cast<double>(total);
    const double w_edge = static_cast<double>(n_non_edge) / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) {
        const double w = truth.values[i] > eta ? w_edge : w_non_edge;
        const double diff = rendered.values[i] - truth.values[i];
        res.value += w * diff * diff;
        res.grad[i] = 2.0 * w * diff;
    }
    return res;
}

ConnectionLossResult connection_loss(const std::vector<ParametricCurve>& curves,
                                     double tau_conn) {
    ConnectionLossResult res;
    res.grad_start.assign(curves.size(), Vec3::Zero());
    res.grad_end.assign(curves.size(), Vec3::Zero());

    const std::size_t n = curves.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 ends_i[2] = {start_point(curves[i].geometry), end_point(curves[i].geometry)};
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec3 ends_j[2] = {start_point(curves[j].geometry),
                                    end_point(curves[j].geometry)};
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const Vec3 delta = ends_i[a] - ends_j[b];
                    const double dist = delta.norm();
                    if (dist >= tau_conn) {
                        continue;
                    }
                    res.value += delta.squaredNorm();
                    const Vec3 g = 2.0 * delta;
                    (a == 0 ? res.grad_start[i] : res.grad_end[i]) += g;
                    (b == 0 ? res.grad_start[j] : res.grad_end[j]) -= g;
                }
            }
        }
    }
    return res;
}

SmoothnessLossResult smoothness_loss(const CoupledScene& coupled) {
    SmoothnessLossResult res;
    res.grad_axis.assign(coupled.gaussians.size(), Vec3::Zero());
    for (const auto& slice : coupled.slices) {
        for (std::size_t i = 0; i + 1 < slice.count; ++i) {
            const std::size_t a = slice.offset + i;
            const std::size_t b = a + 1;
            const Vec3 va = coupled.gaussians[a].frame.col(0);
            Vec3 vb = coupled.gaussians[b].frame.col(0);
            const double sign = va.dot(vb) < 0.0 ? -1.0 : 1.0;
            vb *= sign;
            const Vec3 diff = va - vb;
            res.value += diff.squaredNorm();
            res.grad_axis[a] += 2.0 * diff;
            res.grad_axis[b] -= 2.0 * sign * diff;
        }
    }
    return res;
}

ScalarGradLossResult opacity_regularizer(const std::vector<ParametricCurve>& curves) {
    ScalarGradLossResult res;
    res.grad.assign(curves.size(), 0.0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const double o = curves[i].opacity;
        res.value += std::log1p(o * o / 0.5);
        res.grad[i] = 2.0 * o / (0.5 + o * o);
    }
    return res;
}

MaskLossResult mask_loss(const CoupledScene& coupled) {
    MaskLossResult res;
    const std::size_t n = coupled.gaussians.size();
    res.grad_mask.assign(n, 0.0);
    if (n == 0) {
        return res;
    }
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.value += w * coupled.gaussians[i].mask;
        res.grad_mask[i] = w;
    }
    return res;
}

TotalLossResult total_loss(const EdgeMap& rendered, const EdgeMap& truth,
                           const std::vector<ParametricCurve>& curves,
                           const CoupledScene& coupled, const LossWeights& weights) {
    TotalLossResult res;

    auto edge = edge_loss(rendered, truth, weights.eta);
    res.report.edge = edge.value;
    res.grad_image = std::move(edge.grad);

    auto conn = connection_loss(curves, weights.tau_conn);
    res.report.conn = conn.value;
    res.grad_start.assign(curves.size(), Vec3::Zero());
    res.grad_end.assign(curves.size(), Vec3::Zero());
    for (std::size_t i = 0; i < curves.size(); ++i) {
        res.grad_start[i] = weights.conn * conn.grad_start[i];
        res.grad_end[i] = weights.conn * conn.grad_end[i];
    }

    auto smo = smoothness_loss(coupled);
    res.report.smo = smo.value;

    auto reg = opacity_regularizer(curves);
    res.report.reg = reg.value;
    res.grad_opacity.assign(curves.size(), 0.0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        res.grad_opacity[i] = weights.opacity_reg * reg.grad[i];
    }

    auto mask = mask_loss(coupled);
    res.report.mask = mask.value;

    res.grad_gaussians.assign(coupled.gaussians.size(), GaussianGrads{});
    for (std::size_t i = 0; i < coupled.gaussians.size(); ++i) {
        res.grad_gaussians[i].frame.col(0) = weights.smoothness * smo.grad_axis[i];
        res.grad_gaussians[i].mask = weights.mask * mask.grad_mask[i];
    }

    res.report.total = res.report.edge + weights.conn * res.report.conn +
                       weights.smoothness * res.report.smo + weights.opacity_reg * res.report.reg +
                       weights.mask * res.report.mask;
    return res;
}

}  // namespace curvesplat
