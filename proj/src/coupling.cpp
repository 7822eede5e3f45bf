#include "curvesplat/coupling.hpp"

#include "curvesplat/errors.hpp"

#include <cmath>
#include <cstdio>

namespace curvesplat {

namespace {

constexpr double kVerticalLimit = 0.999;

Vec3 frame_reference(const Vec3& v0) {
    if (std::abs(v0.z()) > kVerticalLimit) {
        return Vec3(0, 1, 0);
    }
    return Vec3(0, 0, 1);
}

}  // namespace

std::vector<double> sample_parameters(int n) {
    std::vector<double> t(static_cast<std::size_t>(std::max(n, 0)));
    for (int i = 0; i < n; ++i) {
        t[static_cast<std::size_t>(i)] = (i + 0.5) / static_cast<double>(n);
    }
    return t;
}

Mat3 build_frame(const Vec3& unit_tangent) {
    const Vec3 v0 = unit_tangent;
    const Vec3 ref = frame_reference(v0);
    const Vec3 w = ref - ref.dot(v0) * v0;
    const Vec3 v1 = w.normalized();
    const Vec3 v2 = v0.cross(v1);
    Mat3 frame;
    frame.col(0) = v0;
    frame.col(1) = v1;
    frame.col(2) = v2;
    return frame;
}

std::vector<GaussianPrimitive> couple(const ParametricCurve& curve, const CouplingConfig& config) {
    const int n = config.samples_per_curve;
    if (n < 2) {
        throw Error("couple: config requires N >= 2 samples");
    }
    if (curve.mask_logits.size() != static_cast<std::size_t>(n)) {
        throw ShapeMismatch("couple: curve " + std::to_string(curve.id) + " has " +
                            std::to_string(curve.mask_logits.size()) + " mask logits, expected " +
                            std::to_string(n));
    }

    const auto t = sample_parameters(n);
    std::vector<Vec3> points(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        points[i] = evaluate(curve.geometry, t[i]);
    }

    std::vector<GaussianPrimitive> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        Vec3 tan;
        try {
            tan = tangent(curve.geometry, t[i], config.tangent_eps);
        } catch (const DegenerateTangent&) {
            throw DegenerateCurve("couple: curve " + std::to_string(curve.id) +
                                  " has a degenerate tangent at t=" + std::to_string(t[i]));
        }
        // The last sample has no forward neighbor; reuse the previous segment.
        const std::size_t seg = std::min(i, t.size() - 2);
        const double seg_len = (points[seg + 1] - points[seg]).norm();

        GaussianPrimitive& g = out[i];
        g.mean = points[i];
        g.frame = build_frame(tan);
        g.scales = Vec3(config.overlap * seg_len, curve.thickness, curve.thickness);
        g.opacity = curve.opacity;
        g.mask = sigmoid(curve.mask_logits[i]);
        g.parent_curve = curve.id;
        g.sample_index = static_cast<int>(i);
    }
    return out;
}

void CurveGrads::resize_for(const ParametricCurve& curve, int n_samples) {
    control_points.assign(static_cast<std::size_t>(control_point_count(curve.geometry)),
                          Vec3::Zero());
    opacity = 0.0;
    thickness = 0.0;
    mask_logits.assign(static_cast<std::size_t>(n_samples), 0.0);
}

void CurveGrads::add_scaled(const CurveGrads& other, double factor) {
    for (std::size_t k = 0; k < control_points.size(); ++k) {
        control_points[k] += factor * other.control_points[k];
    }
    opacity += factor * other.opacity;
    thickness += factor * other.thickness;
    for (std::size_t i = 0; i < mask_logits.size(); ++i) {
        mask_logits[i] += factor * other.mask_logits[i];
    }
}

namespace {

// Weights of each control point in c(t) and c'(t).
void basis_weights(const CurveGeometry& g, double t, double* value_w, double* deriv_w) {
    if (is_cubic(g)) {
        const auto b = cubic_basis(t);
        const auto d = cubic_basis_derivative(t);
        for (int k = 0; k < 4; ++k) {
            value_w[k] = b[static_cast<std::size_t>(k)];
            deriv_w[k] = d[static_cast<std::size_t>(k)];
        }
    } else {
        value_w[0] = 1.0 - t;
        value_w[1] = t;
        deriv_w[0] = -1.0;
        deriv_w[1] = 1.0;
    }
}

}  // namespace

CurveGrads backprop_coupling(const std::vector<GaussianGrads>& grads, const ParametricCurve& curve,
                             const CouplingConfig& config) {
    const int n = config.samples_per_curve;
    if (grads.size() != static_cast<std::size_t>(n)) {
        throw ShapeMismatch("backprop_coupling: got " + std::to_string(grads.size()) +
                            " gradient entries, expected " + std::to_string(n));
    }
    if (curve.mask_logits.size() != static_cast<std::size_t>(n)) {
        throw ShapeMismatch("backprop_coupling: mask logit count mismatch");
    }

    const int n_ctrl = control_point_count(curve.geometry);
    CurveGrads out;
    out.resize_for(curve, n);

    const auto t = sample_parameters(n);
    std::vector<Vec3> points(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        points[i] = evaluate(curve.geometry, t[i]);
    }

    double value_w[4], deriv_w[4];
    for (std::size_t i = 0; i < t.size(); ++i) {
        const GaussianGrads& g = grads[i];
        basis_weights(curve.geometry, t[i], value_w, deriv_w);

        // mean_i = c(t_i)
        for (int k = 0; k < n_ctrl; ++k) {
            out.control_points[static_cast<std::size_t>(k)] += value_w[k] * g.mean;
        }

        // scales = (overlap*|dp|, d, d)
        const std::size_t seg = std::min(i, t.size() - 2);
        const Vec3 dp = points[seg + 1] - points[seg];
        const double dp_norm = dp.norm();
        if (g.scales[0] != 0.0 && dp_norm > 0.0) {
            const Vec3 g_dp = (config.overlap * g.scales[0] / dp_norm) * dp;
            double w_a[4], w_b[4], dw[4];
            basis_weights(curve.geometry, t[seg], w_a, dw);
            basis_weights(curve.geometry, t[seg + 1], w_b, dw);
            for (int k = 0; k < n_ctrl; ++k) {
                out.control_points[static_cast<std::size_t>(k)] += (w_b[k] - w_a[k]) * g_dp;
            }
        }
        out.thickness += g.scales[1] + g.scales[2];

        out.opacity += g.opacity;

        // mask_i = sigmoid(logit_i)
        const double m = sigmoid(curve.mask_logits[i]);
        out.mask_logits[i] += g.mask * m * (1.0 - m);

        // Frame columns: v0 = u/|u| with u = c'(t_i), v1 = w/|w| with
        // w = ref - (ref.v0) v0, v2 = v0 x v1. Walk the chain in reverse.
        Vec3 g_v0 = g.frame.col(0);
        Vec3 g_v1 = g.frame.col(1);
        const Vec3 g_v2 = g.frame.col(2);
        if (g_v0.isZero(0.0) && g_v1.isZero(0.0) && g_v2.isZero(0.0)) {
            continue;
        }
        const Vec3 u = derivative(curve.geometry, t[i]);
        const double u_norm = u.norm();
        if (!(u_norm > config.tangent_eps)) {
            continue;  // degenerate sample contributes nothing
        }
        const Vec3 v0 = u / u_norm;
        const Vec3 ref = frame_reference(v0);
        const Vec3 w_vec = ref - ref.dot(v0) * v0;
        const double w_norm = w_vec.norm();
        const Vec3 v1 = w_vec / w_norm;

        // v2 = v0 x v1: g_a = b x g_c, g_b = g_c x a.
        g_v0 += v1.cross(g_v2);
        g_v1 += g_v2.cross(v0);

        // v1 = w/|w|
        const Vec3 g_w = (g_v1 - v1 * v1.dot(g_v1)) / w_norm;

        // w = ref - (ref.v0) v0
        g_v0 += -(v0.dot(g_w)) * ref - ref.dot(v0) * g_w;

        // v0 = u/|u|
        const Vec3 g_u = (g_v0 - v0 * v0.dot(g_v0)) / u_norm;

        for (int k = 0; k < n_ctrl; ++k) {
            out.control_points[static_cast<std::size_t>(k)] += deriv_w[k] * g_u;
        }
    }
    return out;
}

CoupledScene couple_all(const std::vector<ParametricCurve>& curves, const CouplingConfig& config) {
    CoupledScene scene;
    scene.slices.reserve(curves.size());
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        std::vector<GaussianPrimitive> g;
        try {
            g = couple(curves[ci], config);
        } catch (const DegenerateCurve&) {
            scene.degenerate_curves.push_back(ci);
            continue;
        }
        CoupledScene::Slice slice;
        slice.curve_index = ci;
        slice.offset = scene.gaussians.size();
        slice.count = g.size();
        scene.slices.push_back(slice);
        scene.gaussians.insert(scene.gaussians.end(), g.begin(), g.end());
    }
    return scene;
}

std::string dump_gaussians(const std::vector<GaussianPrimitive>& gaussians) {
    std::string out;
    char line[256];
    for (const auto& g : gaussians) {
        std::snprintf(line, sizeof(line),
                      "%.9g %.9g %.9g  %.9g %.9g %.9g  %.9g %.9g %.9g  %.9g\n", g.mean.x(),
                      g.mean.y(), g.mean.z(), g.frame(0, 0), g.frame(1, 0), g.frame(2, 0),
                      g.scales[0], g.scales[1], g.scales[2], g.opacity * g.mask);
        out += line;
    }
    return out;
}

}  // namespace curvesplat
