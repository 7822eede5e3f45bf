#include "curvesplat/trainer.hpp"

#include "curvesplat/curve_io.hpp"
#include "curvesplat/errors.hpp"
#include "curvesplat/log.hpp"
#include "curvesplat/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace curvesplat {

using nlohmann::json;

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double resolve_or(double value, double fallback) {
    return std::isnan(value) ? fallback : value;
}

}  // namespace

TrainConfig::TrainConfig() {
    loss_weights.tau_conn = kNan;
    adaptive.tau_linearize = kNan;
    adaptive.tau_merge_dist = kNan;
    adaptive.tau_merge_fit = kNan;
    coupling.tangent_eps = kNan;
}

void TrainConfig::resolve(double bbox_diagonal) {
    learning_rates.control_points = resolve_or(learning_rates.control_points, 1e-3 * bbox_diagonal);
    learning_rates.thickness = resolve_or(learning_rates.thickness, 1e-4 * bbox_diagonal);
    loss_weights.tau_conn = resolve_or(loss_weights.tau_conn, 0.02 * bbox_diagonal);
    adaptive.tau_linearize = resolve_or(adaptive.tau_linearize, 0.005 * bbox_diagonal);
    adaptive.tau_merge_dist = resolve_or(adaptive.tau_merge_dist, 0.01 * bbox_diagonal);
    adaptive.tau_merge_fit = resolve_or(adaptive.tau_merge_fit, 0.005 * bbox_diagonal);
    coupling.tangent_eps = resolve_or(coupling.tangent_eps, 1e-9 * bbox_diagonal);
    thickness_floor = resolve_or(thickness_floor, 1e-4 * bbox_diagonal);
}

bool TrainConfig::resolved() const {
    return !std::isnan(learning_rates.control_points) && !std::isnan(learning_rates.thickness) &&
           !std::isnan(loss_weights.tau_conn) && !std::isnan(adaptive.tau_linearize) &&
           !std::isnan(adaptive.tau_merge_dist) && !std::isnan(adaptive.tau_merge_fit) &&
           !std::isnan(coupling.tangent_eps) && !std::isnan(thickness_floor);
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("config: ") + field + " " + what);
        }
    };
    require(initial_curve_count >= 1, "initial_curve_count", "must be >= 1");
    require(iterations >= 1, "iterations", "must be >= 1");
    require(views_per_step >= 1, "views_per_step", "must be >= 1");
    require(coupling.samples_per_curve >= 2, "coupling.samples_per_curve", "must be >= 2");
    require(coupling.overlap > 0.0, "coupling.overlap", "must be positive");
    auto lr_ok = [](double v) { return std::isnan(v) || v > 0.0; };
    require(lr_ok(learning_rates.control_points), "learning_rates.control_points",
            "must be positive");
    require(learning_rates.opacity > 0.0, "learning_rates.opacity", "must be positive");
    require(lr_ok(learning_rates.thickness), "learning_rates.thickness", "must be positive");
    require(learning_rates.mask_logits > 0.0, "learning_rates.mask_logits", "must be positive");
    require(loss_weights.conn >= 0.0, "loss_weights.conn", "must be >= 0");
    require(loss_weights.smoothness >= 0.0, "loss_weights.smoothness", "must be >= 0");
    require(loss_weights.opacity_reg >= 0.0, "loss_weights.opacity_reg", "must be >= 0");
    require(loss_weights.mask >= 0.0, "loss_weights.mask", "must be >= 0");
    require(loss_weights.eta > 0.0 && loss_weights.eta < 1.0, "loss_weights.eta",
            "must lie in (0,1)");
    auto thr_ok = [](double v) { return std::isnan(v) || v > 0.0; };
    require(thr_ok(loss_weights.tau_conn), "loss_weights.tau_conn", "must be positive");
    require(thr_ok(adaptive.tau_linearize), "adaptive.tau_linearize", "must be positive");
    require(adaptive.tau_merge_angle > 0.0 && adaptive.tau_merge_angle < std::numbers::pi,
            "adaptive.tau_merge_angle", "must lie in (0, pi)");
    require(thr_ok(adaptive.tau_merge_dist), "adaptive.tau_merge_dist", "must be positive");
    require(thr_ok(adaptive.tau_merge_fit), "adaptive.tau_merge_fit", "must be positive");
    require(adaptive.theta_split > 0.0 && adaptive.theta_split < std::numbers::pi,
            "adaptive.theta_split", "must lie in (0, pi)");
    require(adaptive.tau_mask > 0.0, "adaptive.tau_mask", "must be positive");
    require(adaptive.tau_opacity > 0.0, "adaptive.tau_opacity", "must be positive");
    require(adaptive.schedule.ordered(), "adaptive.schedule",
            "must satisfy linearize_start < merge_start <= opacity_freeze <= total_iters");
    require(adaptive.schedule.op_period >= 1, "adaptive.schedule.op_period", "must be >= 1");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("config: unknown field \"" + scope + key + "\"");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config: expected a JSON object");
    }
    reject_unknown(doc,
                   {"initial_curve_count", "iterations", "views_per_step", "seed", "workers",
                    "thickness_floor", "learning_rates", "loss_weights", "adaptive", "coupling"},
                   "");

    TrainConfig c;
    read_field(doc, "initial_curve_count", c.initial_curve_count);
    read_field(doc, "iterations", c.iterations);
    read_field(doc, "views_per_step", c.views_per_step);
    read_field(doc, "seed", c.seed);
    read_field(doc, "workers", c.workers);
    read_field(doc, "thickness_floor", c.thickness_floor);

    if (doc.contains("learning_rates")) {
        const auto& j = doc["learning_rates"];
        reject_unknown(j, {"control_points", "opacity", "thickness", "mask_logits"},
                       "learning_rates.");
        read_field(j, "control_points", c.learning_rates.control_points);
        read_field(j, "opacity", c.learning_rates.opacity);
        read_field(j, "thickness", c.learning_rates.thickness);
        read_field(j, "mask_logits", c.learning_rates.mask_logits);
    }
    if (doc.contains("loss_weights")) {
        const auto& j = doc["loss_weights"];
        reject_unknown(j, {"conn", "smoothness", "opacity_reg", "mask", "eta", "tau_conn"},
                       "loss_weights.");
        read_field(j, "conn", c.loss_weights.conn);
        read_field(j, "smoothness", c.loss_weights.smoothness);
        read_field(j, "opacity_reg", c.loss_weights.opacity_reg);
        read_field(j, "mask", c.loss_weights.mask);
        read_field(j, "eta", c.loss_weights.eta);
        read_field(j, "tau_conn", c.loss_weights.tau_conn);
    }
    if (doc.contains("adaptive")) {
        const auto& j = doc["adaptive"];
        reject_unknown(j,
                       {"tau_linearize", "tau_merge_angle", "tau_merge_dist", "tau_merge_fit",
                        "theta_split", "tau_mask", "tau_opacity", "schedule"},
                       "adaptive.");
        read_field(j, "tau_linearize", c.adaptive.tau_linearize);
        read_field(j, "tau_merge_angle", c.adaptive.tau_merge_angle);
        read_field(j, "tau_merge_dist", c.adaptive.tau_merge_dist);
        read_field(j, "tau_merge_fit", c.adaptive.tau_merge_fit);
        read_field(j, "theta_split", c.adaptive.theta_split);
        read_field(j, "tau_mask", c.adaptive.tau_mask);
        read_field(j, "tau_opacity", c.adaptive.tau_opacity);
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            reject_unknown(
                s, {"linearize_start", "merge_start", "op_period", "opacity_freeze", "total_iters"},
                "adaptive.schedule.");
            read_field(s, "linearize_start", c.adaptive.schedule.linearize_start);
            read_field(s, "merge_start", c.adaptive.schedule.merge_start);
            read_field(s, "op_period", c.adaptive.schedule.op_period);
            read_field(s, "opacity_freeze", c.adaptive.schedule.opacity_freeze);
            read_field(s, "total_iters", c.adaptive.schedule.total_iters);
        }
    }
    if (doc.contains("coupling")) {
        const auto& j = doc["coupling"];
        reject_unknown(j, {"samples_per_curve", "overlap", "tangent_eps"}, "coupling.");
        read_field(j, "samples_per_curve", c.coupling.samples_per_curve);
        read_field(j, "overlap", c.coupling.overlap);
        read_field(j, "tangent_eps", c.coupling.tangent_eps);
    }
    c.validate();
    return c;
}

std::string train_config_to_json(const TrainConfig& c) {
    json doc;
    doc["initial_curve_count"] = c.initial_curve_count;
    doc["iterations"] = c.iterations;
    doc["views_per_step"] = c.views_per_step;
    doc["seed"] = c.seed;
    doc["workers"] = c.workers;
    auto put = [](json& j, const char* key, double v) {
        if (!std::isnan(v)) {
            j[key] = v;
        }
    };
    put(doc, "thickness_floor", c.thickness_floor);
    json& lr = doc["learning_rates"];
    put(lr, "control_points", c.learning_rates.control_points);
    lr["opacity"] = c.learning_rates.opacity;
    put(lr, "thickness", c.learning_rates.thickness);
    lr["mask_logits"] = c.learning_rates.mask_logits;
    json& lw = doc["loss_weights"];
    lw["conn"] = c.loss_weights.conn;
    lw["smoothness"] = c.loss_weights.smoothness;
    lw["opacity_reg"] = c.loss_weights.opacity_reg;
    lw["mask"] = c.loss_weights.mask;
    lw["eta"] = c.loss_weights.eta;
    put(lw, "tau_conn", c.loss_weights.tau_conn);
    json& ad = doc["adaptive"];
    put(ad, "tau_linearize", c.adaptive.tau_linearize);
    ad["tau_merge_angle"] = c.adaptive.tau_merge_angle;
    put(ad, "tau_merge_dist", c.adaptive.tau_merge_dist);
    put(ad, "tau_merge_fit", c.adaptive.tau_merge_fit);
    ad["theta_split"] = c.adaptive.theta_split;
    ad["tau_mask"] = c.adaptive.tau_mask;
    ad["tau_opacity"] = c.adaptive.tau_opacity;
    json& sch = ad["schedule"];
    sch["linearize_start"] = c.adaptive.schedule.linearize_start;
    sch["merge_start"] = c.adaptive.schedule.merge_start;
    sch["op_period"] = c.adaptive.schedule.op_period;
    sch["opacity_freeze"] = c.adaptive.schedule.opacity_freeze;
    sch["total_iters"] = c.adaptive.schedule.total_iters;
    json& cp = doc["coupling"];
    cp["samples_per_curve"] = c.coupling.samples_per_curve;
    cp["overlap"] = c.coupling.overlap;
    put(cp, "tangent_eps", c.coupling.tangent_eps);
    return doc.dump(2) + "\n";
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open config: " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return train_config_from_json(ss.str());
}

CurveSet initialize(const TrainConfig& config, const Aabb& bbox) {
    if (!bbox.valid() || !(bbox.diagonal() > 0.0)) {
        throw DegenerateBounds("initialize: scene bounds are degenerate");
    }
    const double diag = bbox.diagonal();
    const double jitter = 0.05 * diag;
    const double thickness = 0.005 * diag;

    CurveSet set;
    set.bbox = bbox;
    set.rng_seed = config.seed;
    Rng rng(config.seed);

    auto sample_box = [&]() {
        return Vec3(rng.uniform(bbox.min.x(), bbox.max.x()),
                    rng.uniform(bbox.min.y(), bbox.max.y()),
                    rng.uniform(bbox.min.z(), bbox.max.z()));
    };
    auto gauss3 = [&]() { return Vec3(rng.normal(), rng.normal(), rng.normal()); };

    set.curves.reserve(static_cast<std::size_t>(config.initial_curve_count));
    for (int i = 0; i < config.initial_curve_count; ++i) {
        const Vec3 p0 = sample_box();
        const Vec3 p3 = sample_box();
        const Vec3 chord = p3 - p0;
        ParametricCurve c;
        c.id = set.allocate_id();
        c.geometry = CubicBezier{p0, p0 + chord / 3.0 + jitter * gauss3(),
                                 p0 + 2.0 * chord / 3.0 + jitter * gauss3(), p3};
        c.opacity = 0.5;
        c.thickness = thickness;
        c.mask_logits.assign(static_cast<std::size_t>(config.coupling.samples_per_curve), 2.0);
        set.curves.push_back(std::move(c));
    }
    return set;
}

namespace {

struct AdamParam {
    double* value;
    double grad;
    double* m;
    double* v;
};

void adam_update(double& value, double grad, double& m, double& v, double lr, double bias1,
                 double bias2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad * grad;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    value -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
}

OptimState& optim_for(TrainerState& state, const ParametricCurve& curve, int n_samples) {
    OptimState& os = state.optim[curve.id];
    const std::size_t n_ctrl = static_cast<std::size_t>(3 * control_point_count(curve.geometry));
    if (os.m_ctrl.size() != n_ctrl) {
        os.m_ctrl.assign(n_ctrl, 0.0);
        os.v_ctrl.assign(n_ctrl, 0.0);
    }
    const auto n_mask = static_cast<std::size_t>(n_samples);
    if (os.m_mask.size() != n_mask) {
        os.m_mask.assign(n_mask, 0.0);
        os.v_mask.assign(n_mask, 0.0);
    }
    return os;
}

}  // namespace

LossReport train_step(TrainerState& state, const TrainView& view, const TrainConfig& config) {
    if (view.edges.width != view.camera.width || view.edges.height != view.camera.height) {
        throw DimensionMismatch("train_step: view dimensions do not match the camera");
    }
    auto& curves = state.curves.curves;

    const CoupledScene coupled = couple_all(curves, config.coupling);
    state.last_gaussian_count = coupled.gaussians.size();

    RenderConfig render_cfg;
    render_cfg.workers = config.workers;
    const RenderOutput rendered = render(coupled.gaussians, view.camera, render_cfg);

    LossWeights weights = config.loss_weights;
    if (!state.flags.mask_loss_active) {
        weights.mask = 0.0;
    }
    TotalLossResult loss = total_loss(rendered.image, view.edges, curves, coupled, weights);

    std::vector<GaussianGrads> gauss_grads =
        render_backward(rendered, loss.grad_image, coupled.gaussians, view.camera);
    for (std::size_t i = 0; i < gauss_grads.size(); ++i) {
        gauss_grads[i].frame += loss.grad_gaussians[i].frame;
        gauss_grads[i].mask += loss.grad_gaussians[i].mask;
    }

    // Per-curve gradients: rendering terms through the coupling chain, plus
    // the direct connection / opacity-regularizer terms.
    std::vector<CurveGrads> curve_grads(curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i) {
        curve_grads[i].resize_for(curves[i], config.coupling.samples_per_curve);
    }
    for (const auto& slice : coupled.slices) {
        const std::vector<GaussianGrads> upstream(
            gauss_grads.begin() + static_cast<std::ptrdiff_t>(slice.offset),
            gauss_grads.begin() + static_cast<std::ptrdiff_t>(slice.offset + slice.count));
        curve_grads[slice.curve_index].add_scaled(
            backprop_coupling(upstream, curves[slice.curve_index], config.coupling), 1.0);
    }
    for (std::size_t i = 0; i < curves.size(); ++i) {
        curve_grads[i].control_points.front() += loss.grad_start[i];
        curve_grads[i].control_points.back() += loss.grad_end[i];
        curve_grads[i].opacity += loss.grad_opacity[i];
    }

    // Control points may not leave the (slightly inflated) scene bounds:
    // geometry outside every frustum receives no rendering gradient and would
    // otherwise drift unsupervised.
    const double margin = 0.05 * state.curves.bbox.diagonal();
    const Vec3 clamp_lo = state.curves.bbox.min - Vec3::Constant(margin);
    const Vec3 clamp_hi = state.curves.bbox.max + Vec3::Constant(margin);

    const std::int64_t n_samples = config.coupling.samples_per_curve;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        ParametricCurve& curve = curves[i];
        const CurveGrads& g = curve_grads[i];
        OptimState& os = optim_for(state, curve, static_cast<int>(n_samples));
        os.step += 1;
        const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(os.step));
        const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(os.step));

        const int n_ctrl = control_point_count(curve.geometry);
        for (int k = 0; k < n_ctrl; ++k) {
            Vec3 p = control_point(curve.geometry, k);
            for (int d = 0; d < 3; ++d) {
                adam_update(p[d], g.control_points[static_cast<std::size_t>(k)][d],
                            os.m_ctrl[static_cast<std::size_t>(3 * k + d)],
                            os.v_ctrl[static_cast<std::size_t>(3 * k + d)],
                            config.learning_rates.control_points, bias1, bias2);
            }
            set_control_point(curve.geometry, k, p.cwiseMax(clamp_lo).cwiseMin(clamp_hi));
        }
        if (state.flags.opacity_learnable) {
            adam_update(curve.opacity, g.opacity, os.m_opacity, os.v_opacity,
                        config.learning_rates.opacity, bias1, bias2);
        }
        adam_update(curve.thickness, g.thickness, os.m_thickness, os.v_thickness,
                    config.learning_rates.thickness, bias1, bias2);
        for (std::size_t s = 0; s < curve.mask_logits.size(); ++s) {
            adam_update(curve.mask_logits[s], g.mask_logits[s], os.m_mask[s], os.v_mask[s],
                        config.learning_rates.mask_logits, bias1, bias2);
        }

        curve.opacity = std::clamp(curve.opacity, 0.0, 1.0);
        curve.thickness = std::max(curve.thickness, config.thickness_floor);
    }
    return loss.report;
}

std::string loss_csv_header() {
    return "iteration,edge,conn,smo,reg,mask,total,n_curves,n_gaussians\n";
}

namespace {

std::string loss_csv_row(int iteration, const LossReport& report, std::size_t n_curves,
                         std::size_t n_gaussians) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n", iteration,
                  report.edge, report.conn, report.smo, report.reg, report.mask, report.total,
                  n_curves, n_gaussians);
    return buf;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n_views) {
    std::vector<std::size_t> order(n_views);
    for (std::size_t i = 0; i < n_views; ++i) {
        order[i] = i;
    }
    Rng rng(seed + 0x9e3779b97f4a7c15ull * (epoch + 1));
    rng.shuffle(order);
    return order;
}

void drop_stale_optim_state(TrainerState& state, const std::vector<TopologyEvent>& events) {
    for (const auto& e : events) {
        for (const CurveId id : e.source) {
            state.optim.erase(id);
        }
        for (const CurveId id : e.result) {
            state.optim.erase(id);
        }
    }
}

TrainResult run_loop(TrainerState state, TrainConfig config, const std::vector<TrainView>& dataset,
                     const TrainOptions& options, std::set<CurveId> initial_ids) {
    TrainResult result;
    result.initial_ids = std::move(initial_ids);

    std::ofstream loss_file;
    std::ofstream event_file;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        const bool fresh = state.iteration == 0;
        loss_file.open(options.out_dir / "loss.csv",
                       fresh ? std::ios::out : std::ios::app);
        event_file.open(options.out_dir / "events.jsonl",
                        fresh ? std::ios::out : std::ios::app);
        if (fresh) {
            loss_file << loss_csv_header();
        }
    }
    result.loss_csv.push_back(loss_csv_header());

    const std::size_t n_views = dataset.size();
    std::size_t cached_epoch = static_cast<std::size_t>(-1);
    std::vector<std::size_t> order;

    for (int iter = state.iteration + 1; iter <= config.iterations; ++iter) {
        const std::size_t epoch = static_cast<std::size_t>(iter - 1) / n_views;
        if (epoch != cached_epoch) {
            order = epoch_order(config.seed, epoch, n_views);
            cached_epoch = epoch;
        }
        const TrainView& view = dataset[order[static_cast<std::size_t>(iter - 1) % n_views]];

        state.flags.opacity_learnable = iter < config.adaptive.schedule.opacity_freeze;
        state.flags.mask_loss_active = iter >= config.adaptive.schedule.opacity_freeze;

        const LossReport report = train_step(state, view, config);
        const std::string row =
            loss_csv_row(iter, report, state.curves.curves.size(), state.last_gaussian_count);
        result.loss_csv.push_back(row);
        if (loss_file.is_open()) {
            loss_file << row;
        }

        ScheduleResult sched = run_schedule(iter, state.curves, config.adaptive, config.coupling);
        drop_stale_optim_state(state, sched.events);
        for (auto& e : sched.events) {
            if (event_file.is_open()) {
                event_file << event_to_json(e) << "\n";
            }
            result.events.push_back(std::move(e));
        }
        state.iteration = iter;

        if (!options.out_dir.empty() && options.checkpoint_period > 0 &&
            (iter % options.checkpoint_period == 0 || iter == config.iterations)) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%06d", iter);
            save_checkpoint(options.out_dir / name, state);
        }
    }

    // Final cleanup: drop essentially transparent curves, logged like any
    // other prune so the event log still explains the final topology.
    {
        std::vector<ParametricCurve> kept;
        kept.reserve(state.curves.curves.size());
        for (auto& c : state.curves.curves) {
            if (c.opacity < config.adaptive.tau_opacity) {
                TopologyEvent e{config.iterations, EventKind::PruneOpacity, {c.id}, {}};
                if (event_file.is_open()) {
                    event_file << event_to_json(e) << "\n";
                }
                result.events.push_back(std::move(e));
                state.optim.erase(c.id);
            } else {
                kept.push_back(std::move(c));
            }
        }
        state.curves.curves = std::move(kept);
    }

    if (!options.out_dir.empty()) {
        save_curves(options.out_dir / "final_curves.json", state.curves.curves);
    }
    result.curves = std::move(state.curves);
    return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<TrainView>& dataset,
                  const TrainOptions& options) {
    if (dataset.empty()) {
        throw EmptyDataset("train: dataset holds no views");
    }
    std::vector<Camera> cams;
    cams.reserve(dataset.size());
    for (const auto& v : dataset) {
        cams.push_back(v.camera);
    }
    const Aabb bbox = bounds_from_cameras(cams);

    TrainConfig resolved = config;
    resolved.resolve(bbox.diagonal());
    resolved.validate();

    TrainerState state;
    state.curves = initialize(resolved, bbox);
    state.iteration = 0;

    std::set<CurveId> initial_ids;
    for (const auto& c : state.curves.curves) {
        initial_ids.insert(c.id);
    }
    log::info("training " + std::to_string(resolved.iterations) + " iterations, " +
              std::to_string(state.curves.curves.size()) + " initial curves, " +
              std::to_string(dataset.size()) + " views");
    return run_loop(std::move(state), std::move(resolved), dataset, options,
                    std::move(initial_ids));
}

TrainResult resume_train(TrainerState state, const TrainConfig& config,
                         const std::vector<TrainView>& dataset, const TrainOptions& options) {
    if (dataset.empty()) {
        throw EmptyDataset("resume_train: dataset holds no views");
    }
    std::vector<Camera> cams;
    cams.reserve(dataset.size());
    for (const auto& v : dataset) {
        cams.push_back(v.camera);
    }
    TrainConfig resolved = config;
    resolved.resolve(bounds_from_cameras(cams).diagonal());
    resolved.validate();

    std::set<CurveId> ids;
    for (const auto& c : state.curves.curves) {
        ids.insert(c.id);
    }
    return run_loop(std::move(state), std::move(resolved), dataset, options, std::move(ids));
}

void save_checkpoint(const std::filesystem::path& base, const TrainerState& state) {
    save_curves(base.string() + ".json", state.curves.curves);

    json doc;
    doc["iteration"] = state.iteration;
    doc["next_id"] = state.curves.next_id;
    doc["rng_seed"] = state.curves.rng_seed;
    doc["bbox"] = {state.curves.bbox.min.x(), state.curves.bbox.min.y(), state.curves.bbox.min.z(),
                   state.curves.bbox.max.x(), state.curves.bbox.max.y(), state.curves.bbox.max.z()};
    json jmask = json::object();
    json joptim = json::object();
    for (const auto& c : state.curves.curves) {
        jmask[std::to_string(c.id)] = c.mask_logits;
        const auto it = state.optim.find(c.id);
        if (it == state.optim.end()) {
            continue;
        }
        const OptimState& os = it->second;
        json jo;
        jo["m_ctrl"] = os.m_ctrl;
        jo["v_ctrl"] = os.v_ctrl;
        jo["m_opacity"] = os.m_opacity;
        jo["v_opacity"] = os.v_opacity;
        jo["m_thickness"] = os.m_thickness;
        jo["v_thickness"] = os.v_thickness;
        jo["m_mask"] = os.m_mask;
        jo["v_mask"] = os.v_mask;
        jo["step"] = os.step;
        joptim[std::to_string(c.id)] = std::move(jo);
    }
    doc["mask_logits"] = std::move(jmask);
    doc["optim"] = std::move(joptim);

    std::ofstream f(base.string() + ".state.json", std::ios::binary);
    if (!f) {
        throw IoError("cannot write checkpoint sidecar: " + base.string() + ".state.json");
    }
    f << doc.dump(2) << "\n";
}

TrainerState load_checkpoint(const std::filesystem::path& base) {
    TrainerState state;
    state.curves.curves = load_curves(base.string() + ".json");

    std::ifstream f(base.string() + ".state.json", std::ios::binary);
    if (!f) {
        throw IoError("cannot open checkpoint sidecar: " + base.string() + ".state.json");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint sidecar: ") + e.what());
    }

    state.iteration = doc.at("iteration").get<int>();
    state.curves.next_id = doc.at("next_id").get<CurveId>();
    state.curves.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    const auto& jb = doc.at("bbox");
    state.curves.bbox.min = Vec3(jb[0].get<double>(), jb[1].get<double>(), jb[2].get<double>());
    state.curves.bbox.max = Vec3(jb[3].get<double>(), jb[4].get<double>(), jb[5].get<double>());

    const auto& jmask = doc.at("mask_logits");
    const auto& joptim = doc.at("optim");
    for (auto& c : state.curves.curves) {
        const std::string key = std::to_string(c.id);
        c.mask_logits = jmask.at(key).get<std::vector<double>>();
        if (!joptim.contains(key)) {
            continue;
        }
        const auto& jo = joptim.at(key);
        OptimState os;
        os.m_ctrl = jo.at("m_ctrl").get<std::vector<double>>();
        os.v_ctrl = jo.at("v_ctrl").get<std::vector<double>>();
        os.m_opacity = jo.at("m_opacity").get<double>();
        os.v_opacity = jo.at("v_opacity").get<double>();
        os.m_thickness = jo.at("m_thickness").get<double>();
        os.v_thickness = jo.at("v_thickness").get<double>();
        os.m_mask = jo.at("m_mask").get<std::vector<double>>();
        os.v_mask = jo.at("v_mask").get<std::vector<double>>();
        os.step = jo.at("step").get<std::int64_t>();
        state.optim[c.id] = std::move(os);
    }
    return state;
}

}  // namespace curvesplat
