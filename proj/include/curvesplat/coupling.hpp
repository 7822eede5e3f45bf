#pragma once

#include "curvesplat/curve.hpp"
#include "curvesplat/types.hpp"

#include <vector>

namespace curvesplat {

/// Rod-shaped splat derived from one curve sample. frame columns are
/// (v0, v1, v2) with v0 along the curve tangent; scales are standard
/// deviations (segment length, thickness, thickness).
struct GaussianPrimitive {
    Vec3 mean = Vec3::Zero();
    Mat3 frame = Mat3::Identity();
    Vec3 scales = Vec3::Ones();
    double opacity = 1.0;
    double mask = 1.0;
    CurveId parent_curve = 0;
    int sample_index = 0;
};

struct CouplingConfig {
    int samples_per_curve = 12;  // N >= 2
    double overlap = 1.0;        // multiplier on the principal scale
    double tangent_eps = 1e-12;  // degenerate-tangent threshold (scene units)
};

/// Midpoint sample parameters t_i = (i+0.5)/N, strictly increasing in (0,1).
std::vector<double> sample_parameters(int n);

/// Orthonormal right-handed frame with v0 = tangent. v1 comes from
/// Gram-Schmidt against a fixed global-z reference (global-y when the tangent
/// is nearly vertical), v2 = v0 x v1.
Mat3 build_frame(const Vec3& unit_tangent);

/// Derive the N Gaussians of one curve. The last sample reuses the previous
/// segment length for its principal scale. Throws DegenerateCurve when the
/// tangent is undefined at any sample, ShapeMismatch when mask_logits has the
/// wrong length.
std::vector<GaussianPrimitive> couple(const ParametricCurve& curve, const CouplingConfig& config);

/// Per-Gaussian upstream gradients, in coupling output order.
struct GaussianGrads {
    Vec3 mean = Vec3::Zero();
    Mat3 frame = Mat3::Zero();
    Vec3 scales = Vec3::Zero();
    double opacity = 0.0;
    double mask = 0.0;
};

/// Gradients of one curve's own parameters.
struct CurveGrads {
    std::vector<Vec3> control_points;  // 4 for cubic, 2 for line
    double opacity = 0.0;
    double thickness = 0.0;
    std::vector<double> mask_logits;

    void resize_for(const ParametricCurve& curve, int n_samples);
    void add_scaled(const CurveGrads& other, double factor);
};

/// Chain rule from Gaussian-attribute gradients back to curve parameters.
/// The Gram-Schmidt reference branch is treated as locally constant.
CurveGrads backprop_coupling(const std::vector<GaussianGrads>& grads, const ParametricCurve& curve,
                             const CouplingConfig& config);

/// Coupled snapshot of a whole curve collection. Curves whose tangent is
/// degenerate at some sample are skipped and flagged instead of erroring.
struct CoupledScene {
    struct Slice {
        std::size_t curve_index = 0;  // index into the source curve vector
        std::size_t offset = 0;       // first Gaussian in `gaussians`
        std::size_t count = 0;
    };
    std::vector<GaussianPrimitive> gaussians;
    std::vector<Slice> slices;
    std::vector<std::size_t> degenerate_curves;  // indices into the source vector
};

CoupledScene couple_all(const std::vector<ParametricCurve>& curves, const CouplingConfig& config);

/// Debug dump: one line per Gaussian (mean, v0, scales, opacity*mask).
std::string dump_gaussians(const std::vector<GaussianPrimitive>& gaussians);

}  // namespace curvesplat
