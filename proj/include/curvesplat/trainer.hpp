#pragma once

#include "curvesplat/adaptive.hpp"
#include "curvesplat/coupling.hpp"
#include "curvesplat/curve_set.hpp"
#include "curvesplat/dataset.hpp"
#include "curvesplat/losses.hpp"
#include "curvesplat/splat_render.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace curvesplat {

/// Learning rates per parameter group. NaN fields resolve to scale-relative
/// defaults at train start (control points 1e-3, thickness 1e-4, both times
/// the scene diagonal).
struct LearningRates {
    double control_points = std::numeric_limits<double>::quiet_NaN();
    double opacity = 0.02;
    double thickness = std::numeric_limits<double>::quiet_NaN();
    double mask_logits = 0.05;
};

struct TrainConfig {
    int initial_curve_count = 256;
    int iterations = 10000;
    int views_per_step = 1;
    std::uint64_t seed = 1;
    LearningRates learning_rates;
    LossWeights loss_weights;  // tau_conn NaN -> 0.02 * diagonal
    AdaptiveConfig adaptive;   // linearize/merge thresholds NaN -> scale defaults
    CouplingConfig coupling;   // tangent_eps NaN -> 1e-9 * diagonal
    double thickness_floor = std::numeric_limits<double>::quiet_NaN();  // 1e-4 * diagonal
    int workers = 0;

    TrainConfig();

    /// Replace NaN fields with their scale-relative defaults.
    void resolve(double bbox_diagonal);
    bool resolved() const;

    void validate() const;  // throws ConfigError naming the offending field
};

/// Parse a JSON config mirroring TrainConfig field names; missing fields keep
/// defaults. Unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Random initial curve set: cubics with endpoints uniform in the box, inner
/// controls on the chord thirds plus Gaussian jitter.
CurveSet initialize(const TrainConfig& config, const Aabb& bbox);

/// Adam moments for one curve, one buffer per parameter group.
struct OptimState {
    std::vector<double> m_ctrl, v_ctrl;
    double m_opacity = 0.0, v_opacity = 0.0;
    double m_thickness = 0.0, v_thickness = 0.0;
    std::vector<double> m_mask, v_mask;
    std::int64_t step = 0;
};

struct TrainerState {
    CurveSet curves;
    std::unordered_map<CurveId, OptimState> optim;
    int iteration = 0;  // last completed iteration
    ScheduleFlags flags;
    std::size_t last_gaussian_count = 0;
};

/// One optimization step on a single view: couple, render, loss, backward,
/// Adam update per parameter group, then attribute clamping.
LossReport train_step(TrainerState& state, const TrainView& view, const TrainConfig& config);

struct TrainOptions {
    std::filesystem::path out_dir;  // empty = keep everything in memory
    int checkpoint_period = 1000;
};

struct TrainResult {
    CurveSet curves;
    std::vector<std::string> loss_csv;  // header + one row per iteration
    std::vector<TopologyEvent> events;
    std::set<CurveId> initial_ids;
};

/// Full training loop: seeded-shuffled view order, adaptive schedule each
/// iteration, periodic checkpoints, final opacity pruning.
TrainResult train(const TrainConfig& config, const std::vector<TrainView>& dataset,
                  const TrainOptions& options = {});

/// Checkpoints pair the curve JSON with an optimizer-state sidecar so a run
/// can resume bit-identically.
void save_checkpoint(const std::filesystem::path& base, const TrainerState& state);
TrainerState load_checkpoint(const std::filesystem::path& base);

/// Resume from a checkpoint and continue to config.iterations.
TrainResult resume_train(TrainerState state, const TrainConfig& config,
                         const std::vector<TrainView>& dataset, const TrainOptions& options = {});

std::string loss_csv_header();

}  // namespace curvesplat
