#include "curvesplat/adaptive.hpp"

#include "curvesplat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace curvesplat {

AdaptiveConfig AdaptiveConfig::defaults_for_scale(double bbox_diagonal) {
    AdaptiveConfig c;
    c.tau_linearize = 0.005 * bbox_diagonal;
    c.tau_merge_dist = 0.01 * bbox_diagonal;
    c.tau_merge_fit = 0.005 * bbox_diagonal;
    return c;
}

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::Linearize: return "Linearize";
        case EventKind::MergeLines: return "MergeLines";
        case EventKind::MergeCubics: return "MergeCubics";
        case EventKind::SplitGeometric: return "SplitGeometric";
        case EventKind::SplitLowMask: return "SplitLowMask";
        case EventKind::PruneOpacity: return "PruneOpacity";
        case EventKind::PruneMask: return "PruneMask";
        case EventKind::PruneDegenerate: return "PruneDegenerate";
    }
    return "?";
}

std::string event_to_json(const TopologyEvent& event) {
    nlohmann::json j;
    j["iteration"] = event.iteration;
    j["kind"] = event_kind_name(event.kind);
    j["source"] = event.source;
    j["result"] = event.result;
    return j.dump();
}

std::vector<TopologyEvent> linearize_pass(CurveSet& set, double tau_linearize, int n_samples) {
    std::vector<TopologyEvent> events;
    for (auto& curve : set.curves) {
        if (!is_cubic(curve.geometry)) {
            continue;
        }
        const auto samples = sample_uniform(curve.geometry, n_samples);
        const LineFit fit = fit_line(samples);
        if (fit.mean_error < tau_linearize) {
            curve.geometry = fit.segment;
            events.push_back({0, EventKind::Linearize, {curve.id}, {curve.id}});
        }
    }
    return events;
}

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (const double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

struct EndpointKey {
    std::int64_t x, y, z;
    bool operator==(const EndpointKey&) const = default;
};

struct EndpointKeyHash {
    std::size_t operator()(const EndpointKey& k) const {
        std::size_t h = std::hash<std::int64_t>()(k.x);
        h = h * 0x9e3779b97f4a7c15ull + std::hash<std::int64_t>()(k.y);
        h = h * 0x9e3779b97f4a7c15ull + std::hash<std::int64_t>()(k.z);
        return h;
    }
};

EndpointKey cell_of(const Vec3& p, double cell) {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
            static_cast<std::int64_t>(std::floor(p.y() / cell)),
            static_cast<std::int64_t>(std::floor(p.z() / cell))};
}

// Closest pairing between the endpoints of two curves: returns (end_a, end_b,
// distance) with end index 0 = start, 1 = end.
struct ClosestEnds {
    int end_a = 0, end_b = 0;
    double dist = 0.0;
};

ClosestEnds closest_endpoints(const CurveGeometry& a, const CurveGeometry& b) {
    const Vec3 ea[2] = {start_point(a), end_point(a)};
    const Vec3 eb[2] = {start_point(b), end_point(b)};
    ClosestEnds best;
    best.dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double d = (ea[i] - eb[j]).norm();
            if (d < best.dist) {
                best = {i, j, d};
            }
        }
    }
    return best;
}

}  // namespace

std::vector<TopologyEvent> merge_pass(CurveSet& set, const AdaptiveConfig& config, int n_samples) {
    std::vector<TopologyEvent> events;
    const double cell = config.tau_merge_dist;
    if (!(cell > 0.0) || set.curves.size() < 2) {
        return events;
    }

    // Uniform spatial hash on endpoints; candidate pairs are curves with
    // endpoints in the same or adjacent cells.
    std::unordered_map<EndpointKey, std::vector<std::size_t>, EndpointKeyHash> grid;
    for (std::size_t i = 0; i < set.curves.size(); ++i) {
        grid[cell_of(start_point(set.curves[i].geometry), cell)].push_back(i);
        grid[cell_of(end_point(set.curves[i].geometry), cell)].push_back(i);
    }
    std::set<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < set.curves.size(); ++i) {
        const Vec3 ends[2] = {start_point(set.curves[i].geometry),
                              end_point(set.curves[i].geometry)};
        for (const Vec3& p : ends) {
            const EndpointKey base = cell_of(p, cell);
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    for (std::int64_t dz = -1; dz <= 1; ++dz) {
                        const auto it = grid.find({base.x + dx, base.y + dy, base.z + dz});
                        if (it == grid.end()) {
                            continue;
                        }
                        for (const std::size_t j : it->second) {
                            if (j != i) {
                                candidates.insert({std::min(i, j), std::max(i, j)});
                            }
                        }
                    }
                }
            }
        }
    }

    std::unordered_set<std::size_t> consumed;
    std::vector<ParametricCurve> merged;
    for (const auto& [ia, ib] : candidates) {
        if (consumed.count(ia) || consumed.count(ib)) {
            continue;
        }
        const ParametricCurve& a = set.curves[ia];
        const ParametricCurve& b = set.curves[ib];
        const ClosestEnds ends = closest_endpoints(a.geometry, b.geometry);
        if (!(ends.dist < config.tau_merge_dist)) {
            continue;
        }

        ParametricCurve out;
        EventKind kind;
        if (is_line(a.geometry) && is_line(b.geometry)) {
            const auto& la = std::get<LineSegment>(a.geometry);
            const auto& lb = std::get<LineSegment>(b.geometry);
            const Vec3 da = la.p1 - la.p0;
            const Vec3 db = lb.p1 - lb.p0;
            const double na = da.norm(), nb = db.norm();
            if (!(na > 0.0 && nb > 0.0)) {
                continue;
            }
            // Undirected angle between segment directions.
            const double cos_theta = std::min(std::abs(da.dot(db)) / (na * nb), 1.0);
            if (!(std::acos(cos_theta) < config.tau_merge_angle)) {
                continue;
            }
            const Vec3 far_a = ends.end_a == 0 ? la.p1 : la.p0;
            const Vec3 far_b = ends.end_b == 0 ? lb.p1 : lb.p0;
            out.geometry = LineSegment{far_a, far_b};
            kind = EventKind::MergeLines;
        } else {
            // Cubic pairs and mixed line/cubic pairs both go through the
            // pooled-sample refit; a straight result linearizes next pass.
            auto sa = sample_uniform(a.geometry, n_samples);
            auto sb = sample_uniform(b.geometry, n_samples);
            // Orient the pooled polyline far(a) -> junction -> far(b).
            if (ends.end_a == 0) {
                std::reverse(sa.begin(), sa.end());
            }
            if (ends.end_b == 1) {
                std::reverse(sb.begin(), sb.end());
            }
            sa.insert(sa.end(), sb.begin(), sb.end());
            const CubicFit fit = fit_cubic(sa);
            if (!(fit.mean_error < config.tau_merge_fit)) {
                continue;
            }
            out.geometry = fit.curve;
            kind = EventKind::MergeCubics;
        }

        out.id = set.allocate_id();
        out.opacity = std::max(a.opacity, b.opacity);
        out.thickness = 0.5 * (a.thickness + b.thickness);
        const double pooled_logit = 0.5 * (mean_of(a.mask_logits) + mean_of(b.mask_logits));
        out.mask_logits.assign(a.mask_logits.size(), pooled_logit);

        consumed.insert(ia);
        consumed.insert(ib);
        events.push_back({0, kind, {a.id, b.id}, {out.id}});
        merged.push_back(std::move(out));
    }

    if (!consumed.empty()) {
        std::vector<ParametricCurve> kept;
        kept.reserve(set.curves.size() - consumed.size() + merged.size());
        for (std::size_t i = 0; i < set.curves.size(); ++i) {
            if (!consumed.count(i)) {
                kept.push_back(std::move(set.curves[i]));
            }
        }
        for (auto& c : merged) {
            kept.push_back(std::move(c));
        }
        set.curves = std::move(kept);
    }
    return events;
}

std::vector<TopologyEvent> split_pass(CurveSet& set, const CoupledScene& coupled,
                                      const AdaptiveConfig& config, int n_samples,
                                      bool allow_geometric) {
    std::vector<TopologyEvent> events;
    const auto params = sample_parameters(n_samples);

    std::vector<ParametricCurve> children;
    std::vector<bool> removed(set.curves.size(), false);

    for (const auto& slice : coupled.slices) {
        ParametricCurve& curve = set.curves[slice.curve_index];
        const double parent_logit = mean_of(curve.mask_logits);

        auto make_child = [&](const CurveGeometry& geometry) {
            ParametricCurve child;
            child.id = set.allocate_id();
            child.geometry = geometry;
            child.opacity = curve.opacity;
            child.thickness = curve.thickness;
            child.mask_logits.assign(curve.mask_logits.size(), parent_logit);
            return child;
        };

        // Geometric abrupt-change detection on adjacent principal axes.
        if (allow_geometric && is_cubic(curve.geometry)) {
            double max_angle = 0.0;
            std::size_t max_at = 0;
            for (std::size_t i = 0; i + 1 < slice.count; ++i) {
                const Vec3 va = coupled.gaussians[slice.offset + i].frame.col(0);
                const Vec3 vb = coupled.gaussians[slice.offset + i + 1].frame.col(0);
                const double angle = std::acos(std::clamp(va.dot(vb), -1.0, 1.0));
                if (angle > max_angle) {
                    max_angle = angle;
                    max_at = i;
                }
            }
            if (max_angle > config.theta_split) {
                const double t_star = 0.5 * (params[max_at] + params[max_at + 1]);
                const auto [left, right] =
                    de_casteljau_split(std::get<CubicBezier>(curve.geometry), t_star);
                auto c1 = make_child(CurveGeometry{left});
                auto c2 = make_child(CurveGeometry{right});
                events.push_back(
                    {0, EventKind::SplitGeometric, {curve.id}, {c1.id, c2.id}});
                children.push_back(std::move(c1));
                children.push_back(std::move(c2));
                removed[slice.curve_index] = true;
                continue;
            }
        }

        // Low-mask detection: cut out the suppressed Gaussian's span.
        std::size_t min_at = 0;
        double min_mask = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < curve.mask_logits.size(); ++i) {
            const double m = sigmoid(curve.mask_logits[i]);
            if (m < min_mask) {
                min_mask = m;
                min_at = i;
            }
        }
        if (min_mask < config.tau_mask) {
            TopologyEvent ev{0, EventKind::SplitLowMask, {curve.id}, {}};
            if (min_at >= 1) {
                auto c1 = make_child(split_geometry(curve.geometry, params[min_at - 1]).first);
                ev.result.push_back(c1.id);
                children.push_back(std::move(c1));
            }
            if (min_at + 1 < params.size()) {
                auto c2 = make_child(split_geometry(curve.geometry, params[min_at + 1]).second);
                ev.result.push_back(c2.id);
                children.push_back(std::move(c2));
            }
            events.push_back(std::move(ev));
            removed[slice.curve_index] = true;
        }
    }

    if (!children.empty() || std::find(removed.begin(), removed.end(), true) != removed.end()) {
        std::vector<ParametricCurve> kept;
        kept.reserve(set.curves.size() + children.size());
        for (std::size_t i = 0; i < set.curves.size(); ++i) {
            if (!removed[i]) {
                kept.push_back(std::move(set.curves[i]));
            }
        }
        for (auto& c : children) {
            kept.push_back(std::move(c));
        }
        set.curves = std::move(kept);
    }
    return events;
}

std::vector<TopologyEvent> prune_pass(CurveSet& set, const AdaptiveConfig& config, int n_samples,
                                      double tangent_eps) {
    std::vector<TopologyEvent> events;
    const auto params = sample_parameters(n_samples);

    std::vector<ParametricCurve> kept;
    kept.reserve(set.curves.size());
    for (auto& curve : set.curves) {
        if (curve.opacity < config.tau_opacity) {
            events.push_back({0, EventKind::PruneOpacity, {curve.id}, {}});
            continue;
        }
        bool all_masked = !curve.mask_logits.empty();
        for (const double logit : curve.mask_logits) {
            if (sigmoid(logit) >= config.tau_mask) {
                all_masked = false;
                break;
            }
        }
        if (all_masked) {
            events.push_back({0, EventKind::PruneMask, {curve.id}, {}});
            continue;
        }
        bool degenerate = false;
        for (const double t : params) {
            if (!(derivative(curve.geometry, t).norm() > tangent_eps)) {
                degenerate = true;
                break;
            }
        }
        if (degenerate) {
            events.push_back({0, EventKind::PruneDegenerate, {curve.id}, {}});
            continue;
        }
        kept.push_back(std::move(curve));
    }
    set.curves = std::move(kept);
    return events;
}

ScheduleResult run_schedule(int iteration, CurveSet& set, const AdaptiveConfig& config,
                            const CouplingConfig& coupling) {
    ScheduleResult res;
    res.flags.opacity_learnable = iteration < config.schedule.opacity_freeze;
    res.flags.mask_loss_active = iteration >= config.schedule.opacity_freeze;

    const auto& sched = config.schedule;
    const bool op_iteration =
        iteration >= sched.linearize_start && sched.op_period > 0 &&
        iteration % sched.op_period == 0;
    if (!op_iteration) {
        return res;
    }

    auto append = [&](std::vector<TopologyEvent> evs) {
        for (auto& e : evs) {
            e.iteration = iteration;
            res.events.push_back(std::move(e));
        }
    };

    // Pass order within a round: prune -> merge -> split -> linearize ->
    // prune. Pruning first keeps dead curves out of merges and out of the
    // low-mask splitter (which would reset their mask state); splitting after
    // merging cuts whatever a merge bent too far; linearizing near the end
    // means every round leaves corners cut and straight spans turned into
    // lines, so line merging's angle test keeps corner pairs from re-fusing
    // later; the trailing prune removes remnants whose inherited masks are
    // already dead. The final round creates no new geometry (merges and
    // geometric splits go unvetted there) but still carves out dead spans.
    if (iteration >= sched.merge_start) {
        append(prune_pass(set, config, coupling.samples_per_curve, coupling.tangent_eps));
        if (iteration < sched.total_iters) {
            // Iterate the greedy-disjoint merge to a fixpoint so chains of
            // fragments zip up within one round. Each inner pass shrinks the
            // curve count, so the loop is bounded.
            for (int inner = 0; inner < 16; ++inner) {
                auto events = merge_pass(set, config, coupling.samples_per_curve);
                if (events.empty()) {
                    break;
                }
                append(std::move(events));
            }
            const CoupledScene coupled = couple_all(set.curves, coupling);
            append(split_pass(set, coupled, config, coupling.samples_per_curve));
        }
    }
    append(linearize_pass(set, config.tau_linearize, coupling.samples_per_curve));
    if (iteration >= sched.merge_start) {
        append(prune_pass(set, config, coupling.samples_per_curve, coupling.tangent_eps));
    }
    return res;
}

std::set<CurveId> replay_events(const std::set<CurveId>& initial,
                                const std::vector<TopologyEvent>& events) {
    std::set<CurveId> ids = initial;
    for (const auto& e : events) {
        for (const CurveId id : e.source) {
            ids.erase(id);
        }
        for (const CurveId id : e.result) {
            ids.insert(id);
        }
    }
    return ids;
}

}  // namespace curvesplat
