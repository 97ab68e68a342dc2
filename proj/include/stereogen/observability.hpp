#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stereogen/bvh.hpp"
#include "stereogen/colmap.hpp"
#include "stereogen/colormap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/image.hpp"
#include "stereogen/mesh.hpp"

namespace stereogen {

/// Per-vertex count of cameras with an unoccluded, non-grazing view.
struct ObservabilityField {
    std::vector<std::uint32_t> counts;
    int max_possible = 0;  // number of cameras considered
};

struct CameraScore {
    int image_id = 0;
    double score = 0.0;
};

struct ObservabilityOptions {
    double grazing_limit_deg = 80.0;  // PGSR's depth-mask limit
    double epsilon = -1.0;            // < 0: 1e-4 x scene bounding-box diagonal
    int jobs = 0;
};

/// Counts, for every mesh vertex, the cameras that (a) see it inside their
/// image bounds at positive depth, (b) reach it unoccluded by the mesh, and
/// (c) view it at most grazing_limit_deg away from the vertex normal.
inline ObservabilityField vertex_observability(const AcceleratedMesh& accel,
                                               const SceneModel& model,
                                               const ObservabilityOptions& options = {}) {
    if (model.images.empty()) {
        throw ValidationError("vertex_observability: model has no images");
    }
    if (!(options.grazing_limit_deg > 0.0) || options.grazing_limit_deg > 90.0) {
        throw ValidationError("grazing_limit_deg must be in (0, 90]");
    }
    const double epsilon =
        options.epsilon > 0.0 ? options.epsilon : accel.default_occlusion_epsilon();
    const double cos_limit = std::cos(options.grazing_limit_deg * M_PI / 180.0);

    struct View {
        const CameraIntrinsics* intr;
        const PosedImage* pose;
        Eigen::Vector3d center;
    };
    std::vector<View> views;
    views.reserve(model.images.size());
    for (const auto& [id, img] : model.images) {
        views.push_back({&model.cameras.at(img.camera_id), &img, img.camera_center()});
    }

    const TriangleMesh& mesh = accel.mesh();
    const std::vector<Eigen::Vector3d> normals = vertex_normals(mesh);

    ObservabilityField field;
    field.max_possible = static_cast<int>(views.size());
    field.counts.assign(mesh.vertices.size(), 0);

    parallel_for(mesh.vertices.size(), options.jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            const Eigen::Vector3d& vertex = mesh.vertices[v];
            std::uint32_t count = 0;
            for (const View& view : views) {
                if (!project(*view.intr, *view.pose, vertex)) {
                    continue;
                }
                const Eigen::Vector3d to_camera = view.center - vertex;
                const double dist = to_camera.norm();
                if (dist <= epsilon) {
                    continue;
                }
                // Zero normals (isolated vertices) skip the grazing test.
                if (normals[v].squaredNorm() > 0.0 &&
                    normals[v].dot(to_camera) < cos_limit * dist) {
                    continue;
                }
                if (accel.is_occluded(view.center, vertex, epsilon)) {
                    continue;
                }
                ++count;
            }
            field.counts[v] = count;
        }
    });
    return field;
}

/// Mesh with red/green/blue vertex attributes encoding counts through a
/// monotone colormap (brighter = seen by more cameras, as in the heatmaps).
inline TriangleMesh export_heatmap(const TriangleMesh& mesh, const ObservabilityField& field) {
    if (field.counts.size() != mesh.vertices.size()) {
        throw ValidationError("export_heatmap: field does not match mesh vertex count");
    }
    TriangleMesh out = mesh;
    std::vector<double> r(mesh.vertices.size()), g(mesh.vertices.size()), b(mesh.vertices.size());
    for (std::size_t i = 0; i < field.counts.size(); ++i) {
        const double t = field.max_possible > 0
                             ? static_cast<double>(field.counts[i]) / field.max_possible
                             : 0.0;
        const auto rgb = viridis_u8(t);
        r[i] = rgb[0];
        g[i] = rgb[1];
        b[i] = rgb[2];
    }
    out.vertex_attributes["red"] = std::move(r);
    out.vertex_attributes["green"] = std::move(g);
    out.vertex_attributes["blue"] = std::move(b);
    return out;
}

/// Ray-casts the mesh from a camera and propagates vertex observability to
/// pixels by barycentric interpolation. Pixels that miss the mesh are invalid.
inline ObservabilityMap render_observability(const AcceleratedMesh& accel,
                                             const ObservabilityField& field,
                                             const CameraIntrinsics& intr, const PosedImage& pose,
                                             int jobs = 0) {
    const TriangleMesh& mesh = accel.mesh();
    if (field.counts.size() != mesh.vertices.size()) {
        throw ValidationError("render_observability: field does not match mesh vertex count");
    }
    ObservabilityMap map(intr.width, intr.height);
    parallel_for(static_cast<std::size_t>(intr.height), jobs,
                 [&](std::size_t row_begin, std::size_t row_end) {
                     for (std::size_t y = row_begin; y < row_end; ++y) {
                         for (int x = 0; x < intr.width; ++x) {
                             const Ray ray = camera_ray(intr, pose, static_cast<double>(x),
                                                        static_cast<double>(y));
                             const auto hit = accel.intersect(ray);
                             if (!hit) {
                                 continue;
                             }
                             const auto& f = mesh.faces[hit->face_index];
                             const double value = hit->barycentric[0] * field.counts[f[0]] +
                                                  hit->barycentric[1] * field.counts[f[1]] +
                                                  hit->barycentric[2] * field.counts[f[2]];
                             map.set(x, static_cast<int>(y), value);
                         }
                     }
                 });
    return map;
}

/// Ranks cameras by summed per-pixel observability, descending; ties break
/// by ascending image id. resolution_scale > 1 renders downscaled (ordering
/// is what matters, not absolute magnitude).
inline std::vector<CameraScore> score_cameras(const AcceleratedMesh& accel,
                                              const ObservabilityField& field,
                                              const SceneModel& model,
                                              double resolution_scale = 1.0, int jobs = 0) {
    if (model.images.empty()) {
        throw ValidationError("score_cameras: model has no images");
    }
    std::vector<CameraScore> scores;
    scores.reserve(model.images.size());
    for (const auto& [id, img] : model.images) {
        CameraIntrinsics intr = model.cameras.at(img.camera_id);
        if (resolution_scale != 1.0) {
            intr = scale_intrinsics(intr, resolution_scale);
        }
        const ObservabilityMap map = render_observability(accel, field, intr, img, jobs);
        double sum = 0.0;  // sequential fold keeps the result deterministic
        for (std::size_t i = 0; i < map.size(); ++i) {
            if (map.valid[i]) {
                sum += map.values[i];
            }
        }
        scores.push_back({id, sum});
    }
    std::stable_sort(scores.begin(), scores.end(), [](const CameraScore& a, const CameraScore& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.image_id < b.image_id;
    });
    return scores;
}

/// First min(k, n) image ids from a ranked score list.
inline std::vector<int> select_top_k(const std::vector<CameraScore>& scores, std::size_t k = 5) {
    if (k < 1) {
        throw ValidationError("select_top_k: k must be >= 1");
    }
    std::vector<int> ids;
    ids.reserve(std::min(k, scores.size()));
    for (std::size_t i = 0; i < scores.size() && i < k; ++i) {
        ids.push_back(scores[i].image_id);
    }
    return ids;
}

/// CSV ranking: header then `image_id,name,score` rows, descending.
inline void write_camera_ranking_csv(const std::filesystem::path& path,
                                     const std::vector<CameraScore>& scores,
                                     const SceneModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "image_id,name,score\n";
    char buf[64];
    for (const CameraScore& s : scores) {
        std::snprintf(buf, sizeof(buf), "%.6f", s.score);
        out << s.image_id << "," << model.images.at(s.image_id).name << "," << buf << "\n";
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace stereogen
