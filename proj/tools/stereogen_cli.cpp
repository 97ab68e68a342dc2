// Command-line front end for the stereo dataset generation toolkit.
//
// Subcommands: validate, observability, render, synth, eval, histogram.
// Exit codes: 0 success, 1 validation/eval failure under --strict,
// 2 usage error, 3 I/O or parse error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stereogen/stereogen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStrictFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct GlobalOptions {
    int jobs = 0;
};

stereogen::TriangleMesh load_mesh_maybe_filtered(const fs::path& path, bool largest_cluster) {
    stereogen::TriangleMesh mesh = stereogen::load_mesh(path);
    if (largest_cluster) {
        // The cluster filter removes TSDF debris but tends to overfilter
        // fine detail, so it stays opt-in.
        mesh = stereogen::keep_largest_cluster(mesh);
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateOptions {
    std::string colmap_dir;
    double tolerance = 0.02;
    bool strict = false;
    std::string report_path;
};

int cmd_validate(const ValidateOptions& opt) {
    const stereogen::SceneModel model = stereogen::load_scene_model(opt.colmap_dir);
    const auto warnings = stereogen::validate_principal_point(model, opt.tolerance);

    std::printf("%zu cameras, %zu images, %zu principal-point warning(s)\n", model.cameras.size(),
                model.images.size(), warnings.size());
    for (const auto& w : warnings) {
        std::printf("  %s\n", w.message.c_str());
    }
    if (!opt.report_path.empty()) {
        json report;
        report["cameras"] = model.cameras.size();
        report["images"] = model.images.size();
        report["warnings"] = json::array();
        for (const auto& w : warnings) {
            report["warnings"].push_back({{"camera_id", w.camera_id},
                                          {"offset_x", w.offset_x},
                                          {"offset_y", w.offset_y},
                                          {"message", w.message}});
        }
        std::ofstream out(opt.report_path);
        if (!out) {
            throw stereogen::IoError("cannot write " + opt.report_path);
        }
        out << report.dump(2) << "\n";
    }
    return (opt.strict && !warnings.empty()) ? kExitStrictFailure : kExitOk;
}

// ---------------------------------------------------------------------------
// observability
// ---------------------------------------------------------------------------

struct ObservabilityCmdOptions {
    std::string colmap_dir;
    std::string mesh_path;
    bool largest_cluster = false;
    double grazing_deg = 80.0;
    double epsilon = -1.0;
    double scale = 1.0;
    std::string heatmap_path;
    std::string ranking_path;
    std::string selection_path;
    std::size_t top_k = 5;
};

int cmd_observability(const ObservabilityCmdOptions& opt, const GlobalOptions& global) {
    const stereogen::SceneModel model = stereogen::load_scene_model(opt.colmap_dir);
    const stereogen::AcceleratedMesh accel(
        load_mesh_maybe_filtered(opt.mesh_path, opt.largest_cluster));

    stereogen::ObservabilityOptions obs;
    obs.grazing_limit_deg = opt.grazing_deg;
    obs.epsilon = opt.epsilon;
    obs.jobs = global.jobs;
    const stereogen::ObservabilityField field = stereogen::vertex_observability(accel, model, obs);

    if (!opt.heatmap_path.empty()) {
        stereogen::write_ply(opt.heatmap_path, stereogen::export_heatmap(accel.mesh(), field));
        std::printf("heatmap: %s\n", opt.heatmap_path.c_str());
    }
    const auto scores = stereogen::score_cameras(accel, field, model, opt.scale, global.jobs);
    if (!opt.ranking_path.empty()) {
        stereogen::write_camera_ranking_csv(opt.ranking_path, scores, model);
        std::printf("ranking: %s\n", opt.ranking_path.c_str());
    }
    if (!opt.selection_path.empty()) {
        const auto ids = stereogen::select_top_k(scores, opt.top_k);
        std::ofstream out(opt.selection_path);
        if (!out) {
            throw stereogen::IoError("cannot write " + opt.selection_path);
        }
        out << json(ids).dump() << "\n";
        std::printf("selection (%zu ids): %s\n", ids.size(), opt.selection_path.c_str());
    }
    for (std::size_t i = 0; i < scores.size() && i < 10; ++i) {
        std::printf("  #%zu image %d  score %.3f\n", i + 1, scores[i].image_id, scores[i].score);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderCmdOptions {
    std::string colmap_dir;
    std::string mesh_path;
    std::string splat_path;
    bool largest_cluster = false;
    int image_id = -1;
    double scale = 1.0;
    double alpha_threshold = 0.5;
    std::string depth_path;
    std::string color_path;
    std::string alpha_path;
};

int cmd_render(const RenderCmdOptions& opt, const GlobalOptions& global) {
    if (opt.mesh_path.empty() && opt.splat_path.empty()) {
        throw stereogen::ValidationError("render needs --mesh or --splats");
    }
    const stereogen::SceneModel model = stereogen::load_scene_model(opt.colmap_dir);
    if (!model.images.count(opt.image_id)) {
        throw stereogen::ValidationError("image id " + std::to_string(opt.image_id) +
                                         " not in model");
    }
    const stereogen::PosedImage& pose = model.images.at(opt.image_id);
    stereogen::CameraIntrinsics intr = model.cameras.at(pose.camera_id);
    if (opt.scale != 1.0) {
        intr = stereogen::scale_intrinsics(intr, opt.scale);
    }

    if (!opt.splat_path.empty()) {
        const stereogen::SplatScene scene = stereogen::load_splats(opt.splat_path);
        stereogen::SplatRenderOptions render;
        render.validity_threshold = opt.alpha_threshold;
        render.jobs = global.jobs;
        const stereogen::SplatRender out = stereogen::render_splats(scene, intr, pose, render);
        if (!opt.depth_path.empty()) {
            stereogen::write_pfm(opt.depth_path, out.depth);
        }
        if (!opt.color_path.empty()) {
            stereogen::write_color_png(opt.color_path, out.color);
        }
        if (!opt.alpha_path.empty()) {
            stereogen::write_pfm(opt.alpha_path, out.alpha);
        }
    } else {
        const stereogen::AcceleratedMesh accel(
            load_mesh_maybe_filtered(opt.mesh_path, opt.largest_cluster));
        const stereogen::DepthMap depth = stereogen::raycast_depth(accel, intr, pose, global.jobs);
        if (!opt.depth_path.empty()) {
            stereogen::write_pfm(opt.depth_path, depth);
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthCmdOptions {
    std::string colmap_dir;
    std::string mesh_path;
    std::string splat_path;
    bool largest_cluster = false;
    std::vector<int> image_ids;
    std::size_t top_k = 5;  // used when --images is absent
    double grazing_deg = 80.0;
    std::vector<double> baselines;
    double suggest_target = 0.0;
    double noc_tolerance = 1.0;
    double alpha_threshold = 0.5;
    double scale = 1.0;
    bool kitti_png = false;
    std::string out_dir;
};

int cmd_synth(const SynthCmdOptions& opt, const GlobalOptions& global) {
    const stereogen::SceneModel model = stereogen::load_scene_model(opt.colmap_dir);

    std::optional<stereogen::AcceleratedMesh> accel;
    if (!opt.mesh_path.empty()) {
        accel.emplace(load_mesh_maybe_filtered(opt.mesh_path, opt.largest_cluster));
    }
    std::optional<stereogen::SplatScene> splats;
    if (!opt.splat_path.empty()) {
        splats = stereogen::load_splats(opt.splat_path);
    }
    if (!accel && !splats) {
        throw stereogen::ValidationError("synth needs --mesh or --splats");
    }

    std::vector<int> image_ids = opt.image_ids;
    if (image_ids.empty()) {
        if (!accel) {
            throw stereogen::ValidationError(
                "camera auto-selection by observability needs --mesh (or pass --images)");
        }
        stereogen::ObservabilityOptions obs;
        obs.grazing_limit_deg = opt.grazing_deg;
        obs.jobs = global.jobs;
        const auto field = stereogen::vertex_observability(*accel, model, obs);
        const auto scores = stereogen::score_cameras(*accel, field, model, opt.scale, global.jobs);
        image_ids = stereogen::select_top_k(scores, opt.top_k);
        std::printf("selected %zu cameras by observability:", image_ids.size());
        for (int id : image_ids) {
            std::printf(" %d", id);
        }
        std::printf("\n");
    }

    // Rendering prefers splats when both sources are given (the mesh then
    // only serves the observability ranking).
    const stereogen::AcceleratedMesh* mesh_source = splats ? nullptr : &*accel;
    const stereogen::SplatScene* splat_source = splats ? &*splats : nullptr;

    if (opt.suggest_target > 0.0) {
        const stereogen::PosedImage& pose = model.images.at(image_ids.front());
        stereogen::CameraIntrinsics intr = model.cameras.at(pose.camera_id);
        if (opt.scale != 1.0) {
            intr = stereogen::scale_intrinsics(intr, opt.scale);
        }
        stereogen::DepthMap depth;
        if (mesh_source) {
            depth = stereogen::raycast_depth(*mesh_source, intr, pose, global.jobs);
        } else {
            stereogen::SplatRenderOptions render;
            render.validity_threshold = opt.alpha_threshold;
            render.jobs = global.jobs;
            depth = stereogen::render_splats(*splat_source, intr, pose, render).depth;
        }
        const double z_median = stereogen::median_valid(depth);
        const double b = stereogen::suggest_baseline(opt.suggest_target, z_median, intr.fx);
        std::printf("median depth %.4f, f %.1f px -> baseline %.6f for median disparity %.1f px\n",
                    z_median, intr.fx, b, opt.suggest_target);
        return kExitOk;
    }

    if (opt.baselines.empty()) {
        throw stereogen::ValidationError(
            "synth needs --baselines (use --suggest-target to derive them)");
    }

    stereogen::SynthOptions synth;
    synth.baselines = opt.baselines;
    synth.noc_tolerance_px = opt.noc_tolerance;
    synth.validity_threshold = opt.alpha_threshold;
    synth.resolution_scale = opt.scale;
    synth.write_kitti_png = opt.kitti_png;
    synth.jobs = global.jobs;

    const auto manifest =
        stereogen::synth_dataset(mesh_source, splat_source, model, image_ids, opt.out_dir, synth);
    std::printf("wrote %zu entries to %s\n", manifest.entries.size(),
                (fs::path(opt.out_dir) / "manifest.json").string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalCmdOptions {
    std::string manifest_path;
    std::string gt_dir;
    std::string pred_dir;
    std::string family;
    double tau = 0.0;  // 0 = take from family
    std::string weighting = "pair";
    std::string json_path;
    bool strict = false;
    double fail_above = 100.0;
};

fs::path find_prediction(const fs::path& pred_dir, const fs::path& reference) {
    const fs::path exact = pred_dir / reference.filename();
    if (fs::exists(exact)) {
        return exact;
    }
    for (const char* ext : {".pfm", ".png"}) {
        const fs::path candidate = pred_dir / (reference.stem().string() + ext);
        if (fs::exists(candidate)) {
            return candidate;
        }
    }
    throw stereogen::IoError("no prediction for " + reference.filename().string() + " in " +
                             pred_dir.string());
}

int cmd_eval(const EvalCmdOptions& opt) {
    stereogen::EvalConfig config;
    if (!opt.family.empty()) {
        config = stereogen::eval_config_for_family(opt.family);
    }
    if (opt.tau > 0.0) {
        config.tau = opt.tau;
        if (config.name.empty()) {
            config.name = "custom";
        }
    }
    if (config.name.empty()) {
        throw stereogen::ValidationError("eval needs --family or --tau");
    }

    stereogen::DatasetReport dataset;
    dataset.name = config.name;
    dataset.tau = config.tau;
    dataset.weighting =
        opt.weighting == "pixel" ? stereogen::Weighting::kPixel : stereogen::Weighting::kPair;

    if (!opt.manifest_path.empty()) {
        const auto manifest = stereogen::read_manifest(opt.manifest_path);
        const fs::path base = fs::path(opt.manifest_path).parent_path();
        for (const auto& entry : manifest.entries) {
            const auto gt = stereogen::load_disparity(base / entry.disparity);
            const auto pred =
                stereogen::load_disparity(find_prediction(opt.pred_dir, entry.disparity));
            stereogen::Mask noc = entry.noc_mask.empty()
                                      ? stereogen::Mask(gt.width, gt.height, true)
                                      : stereogen::read_mask_png(base / entry.noc_mask);
            dataset.pairs.push_back(stereogen::evaluate_pair(pred, gt, noc, config));
        }
    } else if (!opt.gt_dir.empty()) {
        // Directory conventions: <gt-dir>/disp/*.{pfm,png} plus optional
        // <gt-dir>/noc/<stem>.png.
        std::vector<fs::path> gt_files;
        for (const auto& e : fs::directory_iterator(fs::path(opt.gt_dir) / "disp")) {
            if (e.path().extension() == ".pfm" || e.path().extension() == ".png") {
                gt_files.push_back(e.path());
            }
        }
        std::sort(gt_files.begin(), gt_files.end());
        if (gt_files.empty()) {
            throw stereogen::IoError("no ground-truth disparities in " + opt.gt_dir + "/disp");
        }
        for (const auto& gt_path : gt_files) {
            const auto gt = stereogen::load_disparity(gt_path);
            const auto pred = stereogen::load_disparity(find_prediction(opt.pred_dir, gt_path));
            const fs::path noc_path =
                fs::path(opt.gt_dir) / "noc" / (gt_path.stem().string() + ".png");
            stereogen::Mask noc = fs::exists(noc_path) ? stereogen::read_mask_png(noc_path)
                                                       : stereogen::Mask(gt.width, gt.height, true);
            dataset.pairs.push_back(stereogen::evaluate_pair(pred, gt, noc, config));
        }
    } else {
        throw stereogen::ValidationError("eval needs --manifest or --gt-dir");
    }

    stereogen::EvalReport report;
    report.datasets.push_back(dataset);
    std::fputs(stereogen::render_report(report).c_str(), stdout);
    if (!opt.json_path.empty()) {
        std::ofstream out(opt.json_path);
        if (!out) {
            throw stereogen::IoError("cannot write " + opt.json_path);
        }
        out << stereogen::report_to_json(report).dump(2) << "\n";
    }
    if (opt.strict && dataset.all_pct() > opt.fail_above) {
        return kExitStrictFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// histogram
// ---------------------------------------------------------------------------

struct HistogramCmdOptions {
    std::string input;
    double bin_width = 1.0;
    std::string json_path;
};

int cmd_histogram(const HistogramCmdOptions& opt) {
    const stereogen::DisparityMap disp = stereogen::load_disparity(opt.input);
    const auto bins = stereogen::disparity_histogram(disp, opt.bin_width);
    std::size_t total = 0;
    for (const auto& b : bins) {
        total += b.count;
    }
    std::printf("%zu valid pixels, %zu bins (width %.3g px)\n", total, bins.size(), opt.bin_width);
    for (const auto& b : bins) {
        std::printf("%10.3f %8zu\n", b.start, b.count);
    }
    if (!opt.json_path.empty()) {
        json j = json::array();
        for (const auto& b : bins) {
            j.push_back({{"start", b.start}, {"count", b.count}});
        }
        std::ofstream out(opt.json_path);
        if (!out) {
            throw stereogen::IoError("cannot write " + opt.json_path);
        }
        out << j.dump(2) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereogen: stereo training data from 3D reconstructions"};
    app.require_subcommand(1);
    app.fallthrough();  // global options (--jobs) may follow the subcommand
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");

    GlobalOptions global;
    app.add_option("--jobs", global.jobs, "Worker threads (0 = hardware concurrency)");

    ValidateOptions validate;
    auto* validate_cmd = app.add_subcommand("validate", "Check a COLMAP model for off-center principal points");
    validate_cmd->add_option("--colmap", validate.colmap_dir, "COLMAP sparse-model directory")->required();
    validate_cmd->add_option("--tolerance", validate.tolerance, "Allowed offset as a fraction of image size");
    validate_cmd->add_flag("--strict", validate.strict, "Exit 1 when warnings are found");
    validate_cmd->add_option("--report", validate.report_path, "Write a JSON report");

    ObservabilityCmdOptions obs;
    auto* obs_cmd = app.add_subcommand("observability", "Per-vertex observability, heatmap and camera ranking");
    obs_cmd->add_option("--colmap", obs.colmap_dir, "COLMAP sparse-model directory")->required();
    obs_cmd->add_option("--mesh", obs.mesh_path, "Mesh file (PLY or OBJ)")->required();
    obs_cmd->add_flag("--largest-cluster", obs.largest_cluster, "Keep only the largest mesh cluster");
    obs_cmd->add_option("--grazing-deg", obs.grazing_deg, "Grazing-angle limit in degrees");
    obs_cmd->add_option("--epsilon", obs.epsilon, "Occlusion epsilon (default: 1e-4 x scene diagonal)");
    obs_cmd->add_option("--scale", obs.scale, "Downscale factor for camera scoring renders");
    obs_cmd->add_option("--heatmap", obs.heatmap_path, "Output heatmap PLY");
    obs_cmd->add_option("--ranking", obs.ranking_path, "Output ranking CSV");
    obs_cmd->add_option("--selection", obs.selection_path, "Output top-k image id JSON");
    obs_cmd->add_option("--top-k", obs.top_k, "Number of cameras to select");

    RenderCmdOptions render;
    auto* render_cmd = app.add_subcommand("render", "Render depth/color/alpha for one camera");
    render_cmd->add_option("--colmap", render.colmap_dir, "COLMAP sparse-model directory")->required();
    auto* render_mesh = render_cmd->add_option("--mesh", render.mesh_path, "Mesh file");
    auto* render_splats = render_cmd->add_option("--splats", render.splat_path, "Gaussian splat PLY");
    render_mesh->excludes(render_splats);
    render_cmd->add_flag("--largest-cluster", render.largest_cluster, "Keep only the largest mesh cluster");
    render_cmd->add_option("--image-id", render.image_id, "Image id to render")->required();
    render_cmd->add_option("--scale", render.scale, "Downscale factor");
    render_cmd->add_option("--alpha-threshold", render.alpha_threshold, "Depth validity threshold on alpha");
    render_cmd->add_option("--depth", render.depth_path, "Output depth PFM");
    render_cmd->add_option("--color", render.color_path, "Output color PNG (splats only)");
    render_cmd->add_option("--alpha", render.alpha_path, "Output alpha PFM (splats only)");

    SynthCmdOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a stereo training dataset");
    synth_cmd->add_option("--colmap", synth.colmap_dir, "COLMAP sparse-model directory")->required();
    synth_cmd->add_option("--mesh", synth.mesh_path, "Mesh file (render source and/or ranking)");
    synth_cmd->add_option("--splats", synth.splat_path, "Gaussian splat PLY (render source)");
    synth_cmd->add_flag("--largest-cluster", synth.largest_cluster, "Keep only the largest mesh cluster");
    synth_cmd->add_option("--images", synth.image_ids, "Explicit image ids")->delimiter(',');
    synth_cmd->add_option("--top-k", synth.top_k,
                          "Cameras to auto-select by observability when --images is absent");
    synth_cmd->add_option("--grazing-deg", synth.grazing_deg, "Grazing-angle limit for ranking");
    synth_cmd->add_option("--baselines", synth.baselines, "Baselines in world units")->delimiter(',');
    synth_cmd->add_option("--suggest-target", synth.suggest_target,
                          "Print the baseline reaching this median disparity, then exit");
    synth_cmd->add_option("--noc-tol", synth.noc_tolerance, "Left-right consistency tolerance (px)");
    synth_cmd->add_option("--alpha-threshold", synth.alpha_threshold, "Depth validity threshold on alpha");
    synth_cmd->add_option("--scale", synth.scale, "Downscale factor");
    synth_cmd->add_flag("--kitti-png", synth.kitti_png, "Also write 16-bit d*256 PNGs");
    synth_cmd->add_option("--out", synth.out_dir, "Output dataset directory")->required();

    EvalCmdOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Bad-tau disparity evaluation (All / Noc)");
    eval_cmd->add_option("--manifest", eval.manifest_path, "Ground-truth manifest JSON");
    eval_cmd->add_option("--gt-dir", eval.gt_dir, "Ground-truth directory (disp/ plus optional noc/)");
    eval_cmd->add_option("--pred", eval.pred_dir, "Predicted disparity directory")->required();
    eval_cmd->add_option("--family", eval.family, "Dataset family: eth3d, middlebury or kitti");
    eval_cmd->add_option("--tau", eval.tau, "Explicit bad-pixel threshold (overrides family)");
    eval_cmd->add_option("--weighting", eval.weighting, "Aggregate weighting: pair or pixel")
        ->check(CLI::IsMember({"pair", "pixel"}));
    eval_cmd->add_option("--json", eval.json_path, "Write the JSON report twin");
    eval_cmd->add_flag("--strict", eval.strict, "Exit 1 when mean All exceeds --fail-above");
    eval_cmd->add_option("--fail-above", eval.fail_above, "Failure threshold for --strict (percent)");

    HistogramCmdOptions histogram;
    auto* hist_cmd = app.add_subcommand("histogram", "Disparity histogram of a PFM / 16-bit PNG");
    hist_cmd->add_option("--input", histogram.input, "Disparity file")->required();
    hist_cmd->add_option("--bin-width", histogram.bin_width, "Bin width in pixels");
    hist_cmd->add_option("--json", histogram.json_path, "Write bins as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (validate_cmd->parsed()) return cmd_validate(validate);
        if (obs_cmd->parsed()) return cmd_observability(obs, global);
        if (render_cmd->parsed()) return cmd_render(render, global);
        if (synth_cmd->parsed()) return cmd_synth(synth, global);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (hist_cmd->parsed()) return cmd_histogram(histogram);
    } catch (const stereogen::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitUsage;
}
