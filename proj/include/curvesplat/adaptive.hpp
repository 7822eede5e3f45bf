#pragma once

#include "curvesplat/coupling.hpp"
#include "curvesplat/curve_set.hpp"

#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace curvesplat {

struct AdaptiveSchedule {
    int linearize_start = 3000;
    int merge_start = 7000;  // also gates splitting and pruning
    int op_period = 1000;
    int opacity_freeze = 7000;
    int total_iters = 10000;

    bool ordered() const {
        return linearize_start < merge_start && merge_start <= opacity_freeze &&
               opacity_freeze <= total_iters;
    }
};

/// Thresholds are absolute scene units / radians; see defaults_for_scale for
/// the scale-relative defaults.
struct AdaptiveConfig {
    double tau_linearize = 0.005;   // mean chord deviation below which a cubic becomes a line
    double tau_merge_angle = 5.0 * std::numbers::pi / 180.0;
    double tau_merge_dist = 0.01;   // endpoint distance for merge candidates
    double tau_merge_fit = 0.005;   // mean refit error accepted for cubic merges
    double theta_split = 30.0 * std::numbers::pi / 180.0;
    double tau_mask = 0.02;         // low-mask trigger and mask-prune level
    double tau_opacity = 0.05;      // opacity prune level
    AdaptiveSchedule schedule;

    static AdaptiveConfig defaults_for_scale(double bbox_diagonal);
};

enum class EventKind {
    Linearize,
    MergeLines,
    MergeCubics,
    SplitGeometric,
    SplitLowMask,
    PruneOpacity,
    PruneMask,
    PruneDegenerate,
};

const char* event_kind_name(EventKind kind);

struct TopologyEvent {
    int iteration = 0;
    EventKind kind = EventKind::Linearize;
    std::vector<CurveId> source;
    std::vector<CurveId> result;
};

/// One JSON object, no trailing newline (events are logged line-delimited).
std::string event_to_json(const TopologyEvent& event);

/// Replace near-straight cubics with their endpoint chord; attributes and
/// mask logits carry over, the id is kept.
std::vector<TopologyEvent> linearize_pass(CurveSet& set, double tau_linearize, int n_samples);

/// Greedy pairwise merging of nearly-collinear touching lines and of adjacent
/// cubics whose pooled samples refit below tau_merge_fit. Each curve merges at
/// most once per pass.
std::vector<TopologyEvent> merge_pass(CurveSet& set, const AdaptiveConfig& config, int n_samples);

/// Geometric splits at abrupt tangent changes, and low-mask splits that cut
/// out the span of a suppressed Gaussian. `coupled` must be current for the
/// curve state. With allow_geometric false only low-mask splits run (used in
/// the final round, where removing dead spans is safe but new bent geometry
/// would go unvetted).
std::vector<TopologyEvent> split_pass(CurveSet& set, const CoupledScene& coupled,
                                      const AdaptiveConfig& config, int n_samples,
                                      bool allow_geometric = true);

/// Remove transparent curves, fully-masked-out curves, and curves whose
/// geometry has degenerated below the tangent threshold.
std::vector<TopologyEvent> prune_pass(CurveSet& set, const AdaptiveConfig& config, int n_samples,
                                      double tangent_eps);

struct ScheduleFlags {
    bool opacity_learnable = true;
    bool mask_loss_active = false;
};

struct ScheduleResult {
    std::vector<TopologyEvent> events;
    ScheduleFlags flags;
};

/// Dispatch the per-iteration passes (linearize -> split -> merge -> prune)
/// respecting the schedule gates, recoupling between geometry-changing
/// passes. Also derives the trainer flags for this iteration.
ScheduleResult run_schedule(int iteration, CurveSet& set, const AdaptiveConfig& config,
                            const CouplingConfig& coupling);

/// Apply an event log to an initial id set; used to audit that the log fully
/// explains the final topology.
std::set<CurveId> replay_events(const std::set<CurveId>& initial,
                                const std::vector<TopologyEvent>& events);

}  // namespace curvesplat
