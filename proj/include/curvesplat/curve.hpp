#pragma once

#include "curvesplat/errors.hpp"
#include "curvesplat/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace curvesplat {

struct CubicBezier {
    Vec3 p0, p1, p2, p3;
};

struct LineSegment {
    Vec3 p0, p1;
};

using CurveGeometry = std::variant<CubicBezier, LineSegment>;

inline bool is_cubic(const CurveGeometry& g) { return std::holds_alternative<CubicBezier>(g); }
inline bool is_line(const CurveGeometry& g) { return std::holds_alternative<LineSegment>(g); }

/// A cubic has 4 control points, a line segment 2.
int control_point_count(const CurveGeometry& g);
Vec3 control_point(const CurveGeometry& g, int k);
void set_control_point(CurveGeometry& g, int k, const Vec3& p);

Vec3 start_point(const CurveGeometry& g);
Vec3 end_point(const CurveGeometry& g);

/// The optimized entity: geometry plus visibility attributes. mask_logits has
/// one entry per coupled Gaussian sample (see coupling.hpp).
struct ParametricCurve {
    CurveId id = 0;
    CurveGeometry geometry = LineSegment{Vec3::Zero(), Vec3::Zero()};
    double opacity = 0.5;               // in [0,1]
    double thickness = 1e-3;            // > 0, scene units
    std::vector<double> mask_logits;    // size N (coupling sample count)
};

/// Point on the curve at parameter t; t outside [0,1] is clamped.
Vec3 evaluate(const CurveGeometry& g, double t);

/// Unnormalized derivative c'(t) (t clamped to [0,1]).
Vec3 derivative(const CurveGeometry& g, double t);

/// Unit tangent c'(t)/|c'(t)|. Throws DegenerateTangent when |c'(t)| < eps.
Vec3 tangent(const CurveGeometry& g, double t, double eps = 1e-12);

/// Bernstein weights of each control point at t: (B0..B3) for a cubic,
/// (1-t, t) for a line. Weights sum to 1.
std::vector<double> evaluate_jacobian(const CurveGeometry& g, double t);

/// Bernstein weights for a cubic as a fixed array (avoids allocation in the
/// coupling/render hot path).
std::array<double, 4> cubic_basis(double t);
/// Derivatives dB_k^3/dt of the four cubic Bernstein polynomials.
std::array<double, 4> cubic_basis_derivative(double t);

/// Exact subdivision at s in (0,1): c1 covers [0,s], c2 covers [s,1].
/// Throws InvalidSplitParameter otherwise.
std::pair<CubicBezier, CubicBezier> de_casteljau_split(const CubicBezier& c, double s);

/// Endpoint-interpolation split of a segment at s in (0,1).
std::pair<LineSegment, LineSegment> split_segment(const LineSegment& seg, double s);

/// Split any geometry at s, preserving the variant kind of the input.
std::pair<CurveGeometry, CurveGeometry> split_geometry(const CurveGeometry& g, double s);

struct LineFit {
    LineSegment segment;
    double mean_error = 0.0;  // (1/N) sum |fit(t_i) - p_i|
};

struct CubicFit {
    CubicBezier curve;
    double mean_error = 0.0;
    bool fell_back_to_line = false;  // normal equations were rank-deficient
};

/// Chord through the first and last point, scored against the samples at
/// uniform parameters t_i = i/(N-1). Throws InsufficientPoints for < 2 points.
LineFit fit_line(std::span<const Vec3> points);

/// Least-squares cubic through >= 4 ordered samples with chord-length
/// parameterization; both endpoints are clamped to the first/last sample so
/// only the two inner controls are free. Rank-deficient systems fall back to
/// the chord fit (degree-elevated), flagged in the result.
CubicFit fit_cubic(std::span<const Vec3> points);

/// count samples at uniform parameters i/(count-1), endpoints included.
std::vector<Vec3> sample_uniform(const CurveGeometry& g, int count);

/// Polyline arclength approximation with the given segment count.
double arclength(const CurveGeometry& g, int segments = 64);

Aabb geometry_bounds(const CurveGeometry& g);
bool geometry_finite(const CurveGeometry& g);

}  // namespace curvesplat
