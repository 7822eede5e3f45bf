#include "curvesplat/curve_io.hpp"
#include "curvesplat/dataset.hpp"
#include "curvesplat/errors.hpp"
#include "curvesplat/evaluation.hpp"
#include "curvesplat/log.hpp"
#include "curvesplat/parallel.hpp"
#include "curvesplat/scene_oracle.hpp"
#include "curvesplat/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace curvesplat;

constexpr const char* kVersion = "0.1.0";

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open for writing: " + path.string());
    }
    f << text;
}

struct GenArgs {
    std::string kind = "cube";
    int views = 20;
    int size = 128;
    std::uint64_t seed = 1;
    double line_width = 2.0;
    std::string out;
};

int cmd_gen(const GenArgs& args) {
    const SceneKind kind = scene_kind_from_string(args.kind);
    const SyntheticScene scene = make_scene(kind, args.views, args.size, args.seed,
                                            args.line_width);
    write_dataset(args.out, scene);
    std::printf("wrote %zu views to %s\n", scene.cameras.size(), args.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::string resume;
    int iterations_override = -1;
    int workers = 0;
};

int cmd_train(const TrainArgs& args) {
    TrainConfig config;
    if (!args.config.empty()) {
        config = load_train_config(args.config);
    }
    if (args.iterations_override > 0) {
        config.iterations = args.iterations_override;
    }
    if (args.workers > 0) {
        config.workers = args.workers;
    }
    config.validate();

    const Dataset dataset = load_dataset(args.dataset);

    std::filesystem::create_directories(args.out);
    nlohmann::json manifest;
    manifest["config_path"] = args.config;
    manifest["dataset_path"] = args.dataset;
    manifest["output_dir"] = args.out;
    manifest["seed"] = config.seed;
    manifest["tool_version"] = kVersion;
    manifest["start_timestamp"] = timestamp_now();
    manifest["end_timestamp"] = nullptr;
    write_text(std::filesystem::path(args.out) / "manifest.json", manifest.dump(2) + "\n");

    TrainOptions options;
    options.out_dir = args.out;

    TrainResult result;
    if (!args.resume.empty()) {
        result = resume_train(load_checkpoint(args.resume), config, dataset.views, options);
    } else {
        result = train(config, dataset.views, options);
    }

    // Record the fully resolved configuration alongside the run.
    {
        std::vector<Camera> cams;
        for (const auto& v : dataset.views) {
            cams.push_back(v.camera);
        }
        TrainConfig resolved = config;
        resolved.resolve(bounds_from_cameras(cams).diagonal());
        write_text(std::filesystem::path(args.out) / "resolved_config.json",
                   train_config_to_json(resolved));
    }

    manifest["end_timestamp"] = timestamp_now();
    manifest["final_curve_count"] = result.curves.curves.size();
    write_text(std::filesystem::path(args.out) / "manifest.json", manifest.dump(2) + "\n");
    std::printf("finished: %zu curves -> %s/final_curves.json\n", result.curves.curves.size(),
                args.out.c_str());
    return 0;
}

struct RenderArgs {
    std::string curves;
    std::string cameras;
    std::string out;
    std::string mode = "splat";
    double line_width = 2.0;
    int samples = 12;
};

int cmd_render(const RenderArgs& args) {
    auto curves = load_curves(args.curves);
    const auto cams = load_cameras(args.cameras);
    std::filesystem::create_directories(args.out);

    if (args.mode == "oracle") {
        for (const auto& cam : cams) {
            char name[32];
            std::snprintf(name, sizeof(name), "%03d.png", cam.id);
            save_edge_map(std::filesystem::path(args.out) / name,
                          oracle_render(curves, cam, args.line_width));
        }
    } else if (args.mode == "splat") {
        CouplingConfig coupling;
        coupling.samples_per_curve = args.samples;
        coupling.tangent_eps = 1e-9 * curves_bounds(curves).diagonal();
        // Exported curve files carry no mask state; render them unmasked.
        for (auto& c : curves) {
            ensure_mask_logits(c, coupling.samples_per_curve, 40.0);
        }
        const CoupledScene coupled = couple_all(curves, coupling);
        for (const auto& cam : cams) {
            char name[32];
            std::snprintf(name, sizeof(name), "%03d.png", cam.id);
            const RenderOutput out = render(coupled.gaussians, cam);
            save_edge_map(std::filesystem::path(args.out) / name, out.image);
        }
    } else {
        throw ConfigError("render: unknown mode \"" + args.mode + "\" (expected splat|oracle)");
    }
    std::printf("wrote %zu images to %s\n", cams.size(), args.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    double tau = -1.0;
    double resolution = -1.0;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const auto pred = load_curves(args.pred);
    const auto gt = load_curves(args.gt);
    const double diag = curves_bounds(gt).diagonal();
    const double tau = args.tau > 0.0 ? args.tau : 0.01 * diag;
    const double resolution = args.resolution > 0.0 ? args.resolution : 0.005 * diag;

    const MetricsReport report = evaluate_run(pred, gt, tau, resolution);
    const std::string jtext = metrics_to_json(report);
    std::fputs(jtext.c_str(), stdout);
    if (!args.out.empty()) {
        std::filesystem::create_directories(args.out);
        write_text(std::filesystem::path(args.out) / "report.json", jtext);
        write_text(std::filesystem::path(args.out) / "report.csv",
                   metrics_csv_header() + metrics_to_csv_row(report));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvesplat: multi-view parametric curve reconstruction"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    int workers = 0;
    app.add_option("--workers", workers, "cap renderer worker threads (default: all cores)");

    GenArgs gen;
    auto* sub_gen = app.add_subcommand("gen", "generate a synthetic dataset");
    sub_gen->add_option("--kind", gen.kind, "scene kind: cube|circle|helix|mixed");
    sub_gen->add_option("--views", gen.views, "number of cameras")->check(CLI::PositiveNumber);
    sub_gen->add_option("--size", gen.size, "image size in pixels")->check(CLI::PositiveNumber);
    sub_gen->add_option("--seed", gen.seed, "rng seed");
    sub_gen->add_option("--line-width", gen.line_width, "edge stroke width in pixels");
    sub_gen->add_option("--out", gen.out, "output dataset directory")->required();

    TrainArgs train_args;
    auto* sub_train = app.add_subcommand("train", "optimize curves against a dataset");
    sub_train->add_option("--config", train_args.config, "JSON config file");
    sub_train->add_option("--dataset", train_args.dataset, "dataset directory")->required();
    sub_train->add_option("--out", train_args.out, "output directory")->required();
    sub_train->add_option("--resume", train_args.resume, "checkpoint base path to resume from");
    sub_train->add_option("--iterations", train_args.iterations_override,
                          "override iteration count");

    RenderArgs render_args;
    auto* sub_render = app.add_subcommand("render", "render curves from given cameras");
    sub_render->add_option("--curves", render_args.curves, "curve JSON file")->required();
    sub_render->add_option("--cameras", render_args.cameras, "cameras JSON file")->required();
    sub_render->add_option("--out", render_args.out, "output image directory")->required();
    sub_render->add_option("--mode", render_args.mode, "splat|oracle");
    sub_render->add_option("--line-width", render_args.line_width,
                           "oracle stroke width in pixels");
    sub_render->add_option("--samples", render_args.samples, "Gaussians per curve (splat mode)");

    EvalArgs eval_args;
    auto* sub_eval = app.add_subcommand("eval", "compare predicted curves against ground truth");
    sub_eval->add_option("--pred", eval_args.pred, "predicted curve JSON file")->required();
    sub_eval->add_option("--gt", eval_args.gt, "ground-truth curve JSON file")->required();
    sub_eval->add_option("--tau", eval_args.tau, "distance threshold (default 0.01 * gt diag)");
    sub_eval->add_option("--resolution", eval_args.resolution,
                         "sampling resolution (default 0.005 * gt diag)");
    sub_eval->add_option("--out", eval_args.out, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2, --help/--version exit 0
    }

    if (workers > 0) {
        curvesplat::set_default_workers(workers);
    }
    train_args.workers = workers;

    try {
        if (sub_gen->parsed()) {
            return cmd_gen(gen);
        }
        if (sub_train->parsed()) {
            return cmd_train(train_args);
        }
        if (sub_render->parsed()) {
            return cmd_render(render_args);
        }
        if (sub_eval->parsed()) {
            return cmd_eval(eval_args);
        }
    } catch (const ConfigError& e) {
        curvesplat::log::error(e.what());
        return 2;
    } catch (const ParseError& e) {
        curvesplat::log::error(e.what());
        return 2;
    } catch (const std::exception& e) {
        curvesplat::log::error(e.what());
        return 1;
    }
    return 2;
}
