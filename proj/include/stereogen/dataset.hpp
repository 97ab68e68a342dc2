#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stereogen/bvh.hpp"
#include "stereogen/colmap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/pfm.hpp"
#include "stereogen/png_io.hpp"
#include "stereogen/splat_render.hpp"
#include "stereogen/stereo.hpp"

namespace stereogen {

/// One synthesized stereo pair. Paths are relative to the manifest file;
/// image paths are empty for mesh sources (depth-only rendering).
struct ManifestEntry {
    int image_id = 0;
    double baseline = 0.0;
    double focal_length_px = 0.0;
    std::string left_image;
    std::string right_image;
    std::string disparity;  // PFM, left view, pixels
    std::string validity;   // sidecar mask: PFM invalid pixels are written as 0
    std::string noc_mask;   // left-right consistency mask, 255 = non-occluded
};

struct DatasetManifest {
    std::string scene;
    std::vector<ManifestEntry> entries;
};

struct SynthOptions {
    std::vector<double> baselines;
    double noc_tolerance_px = 1.0;
    double validity_threshold = 0.5;  // splat depth validity (accumulated alpha)
    double resolution_scale = 1.0;
    bool write_kitti_png = false;     // also emit 16-bit d*256 PNGs
    int jobs = 0;
};

namespace detail {

template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& write) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    write(tmp);
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const ManifestEntry& e : manifest.entries) {
        entries.push_back({{"image_id", e.image_id},
                           {"baseline", e.baseline},
                           {"focal_length_px", e.focal_length_px},
                           {"left_image", e.left_image},
                           {"right_image", e.right_image},
                           {"disparity", e.disparity},
                           {"validity", e.validity},
                           {"noc_mask", e.noc_mask}});
    }
    return nlohmann::json{{"scene", manifest.scene}, {"entries", entries}};
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    detail::atomic_write(path, [&](const std::filesystem::path& tmp) {
        std::ofstream out(tmp);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << manifest_to_json(manifest).dump(2) << "\n";
    });
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    const nlohmann::json* entries = &j;
    if (j.is_object()) {
        manifest.scene = j.value("scene", "");
        if (!j.contains("entries")) {
            throw ParseError("manifest has no entries array: " + path.string());
        }
        entries = &j.at("entries");
    }
    for (const auto& je : *entries) {
        ManifestEntry e;
        e.image_id = je.value("image_id", 0);
        e.baseline = je.value("baseline", 0.0);
        e.focal_length_px = je.value("focal_length_px", 0.0);
        e.left_image = je.value("left_image", "");
        e.right_image = je.value("right_image", "");
        e.disparity = je.value("disparity", "");
        e.validity = je.value("validity", "");
        e.noc_mask = je.value("noc_mask", "");
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

/// Renders a stereo training dataset: for every (selected camera, baseline)
/// pair, a rectified virtual rig is built, the left disparity derived from
/// rendered depth, and a left-right consistency mask computed from the
/// synthesized geometry itself. Exactly one of mesh / splats must be given;
/// splat scenes also get color renders. Writes are atomic and two runs over
/// identical inputs produce byte-identical files.
inline DatasetManifest synth_dataset(const AcceleratedMesh* mesh, const SplatScene* splats,
                                     const SceneModel& model, const std::vector<int>& image_ids,
                                     const std::filesystem::path& out_dir,
                                     const SynthOptions& options) {
    if ((mesh == nullptr) == (splats == nullptr)) {
        throw ValidationError("synth_dataset: provide exactly one render source");
    }
    if (options.baselines.empty()) {
        throw ValidationError("synth_dataset: at least one baseline required");
    }
    if (image_ids.empty()) {
        throw ValidationError("synth_dataset: no cameras selected");
    }
    for (int id : image_ids) {
        if (!model.images.count(id)) {
            throw ValidationError("synth_dataset: image id " + std::to_string(id) +
                                  " not in model");
        }
    }

    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "disp");
    fs::create_directories(out_dir / "noc");
    fs::create_directories(out_dir / "valid");
    if (splats) {
        fs::create_directories(out_dir / "left");
        fs::create_directories(out_dir / "right");
    }
    if (options.write_kitti_png) {
        fs::create_directories(out_dir / "disp_png");
    }

    DatasetManifest manifest;
    manifest.scene = out_dir.filename().string();

    for (int image_id : image_ids) {
        const PosedImage& left_pose = model.images.at(image_id);
        CameraIntrinsics intr = model.cameras.at(left_pose.camera_id);
        if (options.resolution_scale != 1.0) {
            intr = scale_intrinsics(intr, options.resolution_scale);
        }
        for (std::size_t b = 0; b < options.baselines.size(); ++b) {
            const double baseline = options.baselines[b];
            const StereoRig rig = make_rig(intr, left_pose, baseline);

            char base[64];
            std::snprintf(base, sizeof(base), "cam%06d_b%zu", image_id, b);

            DepthMap left_depth, right_depth;
            if (mesh) {
                left_depth = raycast_depth(*mesh, intr, rig.left, options.jobs);
                right_depth = raycast_depth(*mesh, intr, rig.right, options.jobs);
            } else {
                SplatRenderOptions render_options;
                render_options.validity_threshold = options.validity_threshold;
                render_options.jobs = options.jobs;
                const SplatRender left = render_splats(*splats, intr, rig.left, render_options);
                const SplatRender right = render_splats(*splats, intr, rig.right, render_options);
                left_depth = left.depth;
                right_depth = right.depth;
                detail::atomic_write(out_dir / "left" / (std::string(base) + ".png"),
                                     [&](const fs::path& p) { write_color_png(p, left.color); });
                detail::atomic_write(out_dir / "right" / (std::string(base) + ".png"),
                                     [&](const fs::path& p) { write_color_png(p, right.color); });
            }

            const DisparityMap left_disp = depth_to_disparity(left_depth, intr.fx, baseline);
            const DisparityMap right_disp = depth_to_disparity(right_depth, intr.fx, baseline);
            const Mask noc = occlusion_mask(left_disp, right_disp, options.noc_tolerance_px);

            Mask validity(left_disp.width, left_disp.height);
            for (std::size_t i = 0; i < left_disp.size(); ++i) {
                validity.data[i] = left_disp.valid[i];
            }

            detail::atomic_write(out_dir / "disp" / (std::string(base) + ".pfm"),
                                 [&](const fs::path& p) { write_pfm(p, left_disp); });
            detail::atomic_write(out_dir / "valid" / (std::string(base) + ".png"),
                                 [&](const fs::path& p) { write_mask_png(p, validity); });
            detail::atomic_write(out_dir / "noc" / (std::string(base) + ".png"),
                                 [&](const fs::path& p) { write_mask_png(p, noc); });
            if (options.write_kitti_png) {
                detail::atomic_write(out_dir / "disp_png" / (std::string(base) + ".png"),
                                     [&](const fs::path& p) { write_disparity_png16(p, left_disp); });
            }

            ManifestEntry entry;
            entry.image_id = image_id;
            entry.baseline = baseline;
            entry.focal_length_px = intr.fx;
            if (splats) {
                entry.left_image = "left/" + std::string(base) + ".png";
                entry.right_image = "right/" + std::string(base) + ".png";
            }
            entry.disparity = "disp/" + std::string(base) + ".pfm";
            entry.validity = "valid/" + std::string(base) + ".png";
            entry.noc_mask = "noc/" + std::string(base) + ".png";
            manifest.entries.push_back(std::move(entry));
        }
    }
    write_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace stereogen
