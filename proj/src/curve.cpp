#include "curvesplat/curve.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace curvesplat {

namespace {

double clamp01(double t) { return std::clamp(t, 0.0, 1.0); }

}  // namespace

int control_point_count(const CurveGeometry& g) { return is_cubic(g) ? 4 : 2; }

Vec3 control_point(const CurveGeometry& g, int k) {
    if (const auto* c = std::get_if<CubicBezier>(&g)) {
        switch (k) {
            case 0: return c->p0;
            case 1: return c->p1;
            case 2: return c->p2;
            case 3: return c->p3;
        }
    } else {
        const auto& l = std::get<LineSegment>(g);
        if (k == 0) return l.p0;
        if (k == 1) return l.p1;
    }
    throw Error("control_point: index out of range");
}

void set_control_point(CurveGeometry& g, int k, const Vec3& p) {
    if (auto* c = std::get_if<CubicBezier>(&g)) {
        switch (k) {
            case 0: c->p0 = p; return;
            case 1: c->p1 = p; return;
            case 2: c->p2 = p; return;
            case 3: c->p3 = p; return;
        }
    } else {
        auto& l = std::get<LineSegment>(g);
        if (k == 0) { l.p0 = p; return; }
        if (k == 1) { l.p1 = p; return; }
    }
    throw Error("set_control_point: index out of range");
}

Vec3 start_point(const CurveGeometry& g) { return control_point(g, 0); }
Vec3 end_point(const CurveGeometry& g) { return control_point(g, control_point_count(g) - 1); }

std::array<double, 4> cubic_basis(double t) {
    const double u = 1.0 - t;
    return {u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t};
}

std::array<double, 4> cubic_basis_derivative(double t) {
    const double u = 1.0 - t;
    return {-3.0 * u * u, 3.0 * u * u - 6.0 * u * t, 6.0 * u * t - 3.0 * t * t, 3.0 * t * t};
}

Vec3 evaluate(const CurveGeometry& g, double t) {
    t = clamp01(t);
    if (const auto* c = std::get_if<CubicBezier>(&g)) {
        const auto b = cubic_basis(t);
        return b[0] * c->p0 + b[1] * c->p1 + b[2] * c->p2 + b[3] * c->p3;
    }
    const auto& l = std::get<LineSegment>(g);
    return (1.0 - t) * l.p0 + t * l.p1;
}

Vec3 derivative(const CurveGeometry& g, double t) {
    t = clamp01(t);
    if (const auto* c = std::get_if<CubicBezier>(&g)) {
        const double u = 1.0 - t;
        return 3.0 * (u * u * (c->p1 - c->p0) + 2.0 * u * t * (c->p2 - c->p1) +
                      t * t * (c->p3 - c->p2));
    }
    const auto& l = std::get<LineSegment>(g);
    return l.p1 - l.p0;
}

Vec3 tangent(const CurveGeometry& g, double t, double eps) {
    const Vec3 d = derivative(g, t);
    const double n = d.norm();
    if (!(n > eps)) {
        throw DegenerateTangent("tangent: derivative norm below threshold");
    }
    return d / n;
}

std::vector<double> evaluate_jacobian(const CurveGeometry& g, double t) {
    t = clamp01(t);
    if (is_cubic(g)) {
        const auto b = cubic_basis(t);
        return {b[0], b[1], b[2], b[3]};
    }
    return {1.0 - t, t};
}

std::pair<CubicBezier, CubicBezier> de_casteljau_split(const CubicBezier& c, double s) {
    if (!(s > 0.0 && s < 1.0)) {
        throw InvalidSplitParameter("de_casteljau_split: s must lie in (0,1)");
    }
    const Vec3 q0 = (1.0 - s) * c.p0 + s * c.p1;
    const Vec3 q1 = (1.0 - s) * c.p1 + s * c.p2;
    const Vec3 q2 = (1.0 - s) * c.p2 + s * c.p3;
    const Vec3 r0 = (1.0 - s) * q0 + s * q1;
    const Vec3 r1 = (1.0 - s) * q1 + s * q2;
    const Vec3 m = (1.0 - s) * r0 + s * r1;
    return {CubicBezier{c.p0, q0, r0, m}, CubicBezier{m, r1, q2, c.p3}};
}

std::pair<LineSegment, LineSegment> split_segment(const LineSegment& seg, double s) {
    if (!(s > 0.0 && s < 1.0)) {
        throw InvalidSplitParameter("split_segment: s must lie in (0,1)");
    }
    const Vec3 m = (1.0 - s) * seg.p0 + s * seg.p1;
    return {LineSegment{seg.p0, m}, LineSegment{m, seg.p1}};
}

std::pair<CurveGeometry, CurveGeometry> split_geometry(const CurveGeometry& g, double s) {
    if (const auto* c = std::get_if<CubicBezier>(&g)) {
        auto [a, b] = de_casteljau_split(*c, s);
        return {CurveGeometry{a}, CurveGeometry{b}};
    }
    auto [a, b] = split_segment(std::get<LineSegment>(g), s);
    return {CurveGeometry{a}, CurveGeometry{b}};
}

LineFit fit_line(std::span<const Vec3> points) {
    const std::size_t n = points.size();
    if (n < 2) {
        throw InsufficientPoints("fit_line: need at least 2 points");
    }
    LineFit fit;
    fit.segment = LineSegment{points.front(), points.back()};
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        const Vec3 on_line = (1.0 - t) * fit.segment.p0 + t * fit.segment.p1;
        sum += (on_line - points[i]).norm();
    }
    fit.mean_error = sum / static_cast<double>(n);
    return fit;
}

namespace {

// Degree-elevate a chord to a cubic and score it against the samples.
CubicFit line_fallback(std::span<const Vec3> points, std::span<const double> params) {
    const Vec3 a = points.front();
    const Vec3 b = points.back();
    CubicFit fit;
    fit.curve = CubicBezier{a, a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0, b};
    fit.fell_back_to_line = true;
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sum += (evaluate(CurveGeometry{fit.curve}, params[i]) - points[i]).norm();
    }
    fit.mean_error = sum / static_cast<double>(points.size());
    return fit;
}

}  // namespace

namespace {

struct LsqResult {
    CubicBezier curve;
    double mean_error = 0.0;
    bool singular = false;
};

// With P0, P3 clamped, solve the 2x2 normal equations for P1, P2. The system
// matrix depends only on the parameter values, so one solve covers all three
// coordinates.
LsqResult solve_clamped_lsq(std::span<const Vec3> points, std::span<const double> t) {
    const std::size_t n = points.size();
    const Vec3 p_first = points.front();
    const Vec3 p_last = points.back();
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;
    Vec3 b1 = Vec3::Zero(), b2 = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const auto w = cubic_basis(t[i]);
        const Vec3 r = points[i] - w[0] * p_first - w[3] * p_last;
        a11 += w[1] * w[1];
        a12 += w[1] * w[2];
        a22 += w[2] * w[2];
        b1 += w[1] * r;
        b2 += w[2] * r;
    }
    LsqResult res;
    const double det = a11 * a22 - a12 * a12;
    const double scale = std::max(a11, a22);
    if (!(det > 1e-12 * std::max(scale * scale, 1e-300))) {
        res.singular = true;
        return res;
    }
    res.curve = CubicBezier{p_first, (a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det,
                            p_last};
    double sum = 0.0;
    const CurveGeometry g{res.curve};
    for (std::size_t i = 0; i < n; ++i) {
        sum += (evaluate(g, t[i]) - points[i]).norm();
    }
    res.mean_error = sum / static_cast<double>(n);
    return res;
}

double mean_distance(const CubicBezier& c, std::span<const Vec3> points,
                     std::span<const double> t) {
    const CurveGeometry g{c};
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sum += (evaluate(g, t[i]) - points[i]).norm();
    }
    return sum / static_cast<double>(points.size());
}

}  // namespace

CubicFit fit_cubic(std::span<const Vec3> points) {
    const std::size_t n = points.size();
    if (n < 4) {
        throw InsufficientPoints("fit_cubic: need at least 4 points");
    }

    // Chord-length parameterization as the initial guess.
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        t[i] = t[i - 1] + (points[i] - points[i - 1]).norm();
    }
    const double total = t.back();
    if (!(total > 0.0)) {
        // All samples coincide; any degenerate cubic through the point is exact.
        CubicFit fit;
        fit.curve = CubicBezier{points[0], points[0], points[0], points[0]};
        return fit;
    }
    for (auto& ti : t) {
        ti /= total;
    }

    const LsqResult initial = solve_clamped_lsq(points, t);
    if (initial.singular) {
        return line_fallback(points, t);
    }

    // Joint Levenberg-Marquardt over the two inner controls and the interior
    // parameters; sample parameters are unknowns too, so exactly
    // representable sample sets fit to round-off regardless of how the
    // samples were spaced. Endpoints and their parameters stay clamped.
    const std::size_t n_free_t = n - 2;
    const std::size_t dim = 6 + n_free_t;
    Eigen::VectorXd x(dim);
    x.segment<3>(0) = initial.curve.p1;
    x.segment<3>(3) = initial.curve.p2;
    for (std::size_t i = 0; i < n_free_t; ++i) {
        x[6 + static_cast<Eigen::Index>(i)] = t[i + 1];
    }

    const Vec3 p_first = points.front();
    const Vec3 p_last = points.back();
    auto unpack = [&](const Eigen::VectorXd& v, CubicBezier& c, std::vector<double>& params) {
        c = CubicBezier{p_first, v.segment<3>(0), v.segment<3>(3), p_last};
        params[0] = 0.0;
        params[n - 1] = 1.0;
        for (std::size_t i = 0; i < n_free_t; ++i) {
            params[i + 1] = std::clamp(v[6 + static_cast<Eigen::Index>(i)], 0.0, 1.0);
        }
    };

    CubicBezier cur_curve;
    std::vector<double> cur_t(n);
    unpack(x, cur_curve, cur_t);
    double cur_err = mean_distance(cur_curve, points, cur_t);
    CubicBezier best_curve = cur_curve;
    double best_err = cur_err;

    // Chord-length spacing can seed the wrong projection basin on curves with
    // strongly uneven speed; one restart from globally re-projected
    // parameters recovers those cases.
    auto global_reproject = [&]() {
        constexpr int kDense = 256;
        const CurveGeometry g{cur_curve};
        std::array<Vec3, kDense + 1> dense;
        for (int k = 0; k <= kDense; ++k) {
            dense[static_cast<std::size_t>(k)] = evaluate(g, static_cast<double>(k) / kDense);
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double best_d = std::numeric_limits<double>::infinity();
            int best_k = 0;
            for (int k = 0; k <= kDense; ++k) {
                const double d = (dense[static_cast<std::size_t>(k)] - points[i]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_k = k;
                }
            }
            x[6 + static_cast<Eigen::Index>(i - 1)] = static_cast<double>(best_k) / kDense;
        }
        unpack(x, cur_curve, cur_t);
        cur_err = mean_distance(cur_curve, points, cur_t);
    };

    double lambda = 1e-6;
    bool restarted = false;
    for (int iter = 0; iter < 120 && best_err > 1e-13; ++iter) {
        Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd jtr = Eigen::VectorXd::Zero(dim);
        const CurveGeometry g{cur_curve};
        for (std::size_t i = 0; i < n; ++i) {
            const auto w = cubic_basis(cur_t[i]);
            const Vec3 r = evaluate(g, cur_t[i]) - points[i];
            Eigen::Matrix<double, 3, Eigen::Dynamic> jac =
                Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, dim);
            jac.block<3, 3>(0, 0) = w[1] * Mat3::Identity();
            jac.block<3, 3>(0, 3) = w[2] * Mat3::Identity();
            if (i >= 1 && i + 1 < n) {
                jac.col(6 + static_cast<Eigen::Index>(i - 1)) = derivative(g, cur_t[i]);
            }
            jtj.noalias() += jac.transpose() * jac;
            jtr.noalias() += jac.transpose() * r;
        }
        bool accepted = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd dx = damped.ldlt().solve(-jtr);
            if (!dx.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const Eigen::VectorXd cand = x + dx;
            CubicBezier cand_curve;
            std::vector<double> cand_t(n);
            unpack(cand, cand_curve, cand_t);
            const double cand_err = mean_distance(cand_curve, points, cand_t);
            if (cand_err < cur_err) {
                x = cand;
                cur_curve = cand_curve;
                cur_t = cand_t;
                cur_err = cand_err;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if (cur_err < best_err) {
            best_err = cur_err;
            best_curve = cur_curve;
        }
        if (!accepted) {
            if (restarted || best_err <= 1e-10) {
                break;
            }
            restarted = true;
            global_reproject();
            lambda = 1e-6;
        }
    }

    CubicFit fit;
    fit.curve = best_err <= initial.mean_error ? best_curve : initial.curve;
    fit.mean_error = std::min(best_err, initial.mean_error);
    return fit;
}

std::vector<Vec3> sample_uniform(const CurveGeometry& g, int count) {
    std::vector<Vec3> out;
    if (count <= 0) {
        return out;
    }
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        out.push_back(evaluate(g, 0.5));
        return out;
    }
    for (int i = 0; i < count; ++i) {
        out.push_back(evaluate(g, static_cast<double>(i) / static_cast<double>(count - 1)));
    }
    return out;
}

double arclength(const CurveGeometry& g, int segments) {
    if (is_line(g)) {
        const auto& l = std::get<LineSegment>(g);
        return (l.p1 - l.p0).norm();
    }
    double len = 0.0;
    Vec3 prev = evaluate(g, 0.0);
    for (int i = 1; i <= segments; ++i) {
        const Vec3 cur = evaluate(g, static_cast<double>(i) / static_cast<double>(segments));
        len += (cur - prev).norm();
        prev = cur;
    }
    return len;
}

Aabb geometry_bounds(const CurveGeometry& g) {
    // Control points bound the curve (convex hull property).
    Aabb box;
    for (int k = 0; k < control_point_count(g); ++k) {
        box.expand(control_point(g, k));
    }
    return box;
}

bool geometry_finite(const CurveGeometry& g) {
    for (int k = 0; k < control_point_count(g); ++k) {
        if (!control_point(g, k).allFinite()) {
            return false;
        }
    }
    return true;
}

}  // namespace curvesplat
