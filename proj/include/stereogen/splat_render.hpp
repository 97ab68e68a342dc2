#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "stereogen/bvh.hpp"
#include "stereogen/colmap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/image.hpp"
#include "stereogen/splats.hpp"

namespace stereogen {

// ---------------------------------------------------------------------------
// Splat projection
// ---------------------------------------------------------------------------

/// A splat projected into a view: 2D mean in continuous pixel coordinates,
/// 2x2 screen-space covariance, mean depth, plus the shading payload the
/// compositor needs.
struct Splat2D {
    Eigen::Vector2d mean2d{0.0, 0.0};
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
    double depth = 0.0;
    double opacity = 0.0;
    Eigen::Vector3d color{0.0, 0.0, 0.0};
    double radius_x = 0.0;  // 3-sigma footprint half extents, pixels
    double radius_y = 0.0;
};

/// Anti-aliasing floor added to the projected covariance diagonal, matching
/// the reference rasterizer convention.
inline constexpr double kCov2dRegularization = 0.3;

/// EWA-style perspective projection of a Gaussian: cov2d = J W Sigma Wt Jt
/// with Sigma = R diag(scale^2) Rt, W the world-to-camera rotation and J the
/// affine Jacobian of the pinhole projection at the splat mean. Absent when
/// the mean is at or behind the near clip.
inline std::optional<Splat2D> project_splat(const Splat& splat, const CameraIntrinsics& intr,
                                            const PosedImage& pose, double near_clip = 0.01) {
    const Eigen::Matrix3d world_to_cam = pose.rotation_matrix();
    const Eigen::Vector3d cam = world_to_cam * splat.mean + pose.translation;
    if (!(cam.z() > near_clip)) {
        return std::nullopt;
    }
    const double inv_z = 1.0 / cam.z();

    Eigen::Matrix<double, 2, 3> jacobian;
    jacobian << intr.fx * inv_z, 0.0, -intr.fx * cam.x() * inv_z * inv_z,
        0.0, intr.fy * inv_z, -intr.fy * cam.y() * inv_z * inv_z;

    const Eigen::Matrix3d rot = splat.rotation.toRotationMatrix();
    const Eigen::Matrix3d cov3d =
        rot * splat.scale.cwiseProduct(splat.scale).asDiagonal() * rot.transpose();
    const Eigen::Matrix<double, 2, 3> t = jacobian * world_to_cam;
    Eigen::Matrix2d cov2d = t * cov3d * t.transpose();
    cov2d(0, 0) += kCov2dRegularization;
    cov2d(1, 1) += kCov2dRegularization;

    Splat2D out;
    out.mean2d = Eigen::Vector2d(intr.fx * cam.x() * inv_z + intr.cx,
                                 intr.fy * cam.y() * inv_z + intr.cy);
    out.cov2d = cov2d;
    out.depth = cam.z();
    out.opacity = splat.opacity;
    out.color = splat.color;
    out.radius_x = 3.0 * std::sqrt(cov2d(0, 0));
    out.radius_y = 3.0 * std::sqrt(cov2d(1, 1));
    return out;
}

// ---------------------------------------------------------------------------
// Front-to-back alpha compositing
// ---------------------------------------------------------------------------

struct CompositeOptions {
    double alpha_floor = 1.0 / 255.0;      // contributions below this are skipped
    double alpha_ceiling = 0.99;           // per-splat alpha clamp
    double transmittance_cutoff = 1e-4;    // early termination; 0 disables
};

struct PixelComposite {
    Eigen::Vector3d color{0.0, 0.0, 0.0};
    double depth_raw = 0.0;      // sum of z_i * alpha_i * T_i
    double alpha = 0.0;          // sum of alpha_i * T_i
    double transmittance = 1.0;  // remaining T after the last splat
};

namespace detail {

/// Accumulates one splat into a pixel; returns true when the transmittance
/// cutoff terminates the traversal.
inline bool accumulate_splat(PixelComposite& acc, const Splat2D& splat, double u, double v,
                             const CompositeOptions& options) {
    const Eigen::Vector2d d(u - splat.mean2d.x(), v - splat.mean2d.y());
    const Eigen::Matrix2d& cov = splat.cov2d;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0)) {
        return false;
    }
    const double inv_det = 1.0 / det;
    const double power = -0.5 * inv_det *
                         (cov(1, 1) * d.x() * d.x() - 2.0 * cov(0, 1) * d.x() * d.y() +
                          cov(0, 0) * d.y() * d.y());
    if (power > 0.0) {
        return false;
    }
    double alpha = splat.opacity * std::exp(power);
    if (alpha < options.alpha_floor) {
        return false;
    }
    alpha = std::min(alpha, options.alpha_ceiling);
    const double weight = alpha * acc.transmittance;
    acc.color += splat.color * weight;
    acc.depth_raw += splat.depth * weight;
    acc.alpha += weight;
    acc.transmittance *= 1.0 - alpha;
    return options.transmittance_cutoff > 0.0 && acc.transmittance < options.transmittance_cutoff;
}

}  // namespace detail

/// Composites a depth-sorted (ascending) splat list at a pixel:
/// out = sum_i value_i * alpha_i * prod_{j<i} (1 - alpha_j), where alpha_i is
/// the splat opacity shaped by its projected Gaussian footprint.
inline PixelComposite composite_pixel(std::span<const Splat2D> front_to_back, double u, double v,
                                      const CompositeOptions& options = {}) {
    assert(std::is_sorted(front_to_back.begin(), front_to_back.end(),
                          [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; }) &&
           "composite_pixel requires splats sorted front to back");
    PixelComposite acc;
    for (const Splat2D& splat : front_to_back) {
        if (detail::accumulate_splat(acc, splat, u, v, options)) {
            break;
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Full-frame rendering
// ---------------------------------------------------------------------------

struct SplatRenderOptions {
    CompositeOptions composite;
    double validity_threshold = 0.5;  // depth valid where accumulated alpha exceeds this
    double near_clip = 0.01;
    int jobs = 0;
};

struct SplatRender {
    ColorImage color;
    DepthMap depth;      // alpha-normalized: depth_raw / alpha
    DepthMap depth_raw;  // unnormalized accumulation, kept for diagnostics
    AlphaMap alpha;
};

/// Renders color, depth and accumulated alpha for one view. Splats are
/// depth-sorted once per view (global sort, stable tie-break on index) and
/// binned into tiles; each pixel composites the splats whose 3-sigma
/// footprint covers its center. Deterministic for any worker count.
inline SplatRender render_splats(const SplatScene& scene, const CameraIntrinsics& intr,
                                 const PosedImage& pose, const SplatRenderOptions& options = {}) {
    if (scene.splats.empty()) {
        throw ValidationError("render_splats: scene is empty");
    }
    const int width = intr.width;
    const int height = intr.height;

    std::vector<Splat2D> projected;
    projected.reserve(scene.splats.size());
    for (const Splat& splat : scene.splats) {
        if (auto p = project_splat(splat, intr, pose, options.near_clip)) {
            projected.push_back(*p);
        }
    }
    std::stable_sort(projected.begin(), projected.end(),
                     [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; });

    constexpr int kTile = 16;
    const int tiles_x = (width + kTile - 1) / kTile;
    const int tiles_y = (height + kTile - 1) / kTile;
    std::vector<std::vector<std::uint32_t>> tile_lists(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (std::uint32_t i = 0; i < projected.size(); ++i) {
        const Splat2D& s = projected[i];
        // Pixel x covers centers with |x + 0.5 - mean| <= radius.
        const int x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - s.radius_x - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(s.mean2d.x() + s.radius_x - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - s.radius_y - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(s.mean2d.y() + s.radius_y - 0.5)));
        if (x0 > x1 || y0 > y1) {
            continue;
        }
        for (int ty = y0 / kTile; ty <= y1 / kTile; ++ty) {
            for (int tx = x0 / kTile; tx <= x1 / kTile; ++tx) {
                tile_lists[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
            }
        }
    }

    SplatRender out;
    out.color = ColorImage(width, height);
    out.depth = DepthMap(width, height);
    out.depth_raw = DepthMap(width, height);
    out.alpha = AlphaMap(width, height, 0.0, true);

    parallel_for(static_cast<std::size_t>(height), options.jobs,
                 [&](std::size_t row_begin, std::size_t row_end) {
                     for (std::size_t y = row_begin; y < row_end; ++y) {
                         const auto* tile_row = &tile_lists[(y / kTile) * tiles_x];
                         for (int x = 0; x < width; ++x) {
                             const double u = x + 0.5;
                             const double v = static_cast<double>(y) + 0.5;
                             PixelComposite acc;
                             for (std::uint32_t idx : tile_row[x / kTile]) {
                                 const Splat2D& s = projected[idx];
                                 if (std::abs(u - s.mean2d.x()) > s.radius_x ||
                                     std::abs(v - s.mean2d.y()) > s.radius_y) {
                                     continue;
                                 }
                                 if (detail::accumulate_splat(acc, s, u, v, options.composite)) {
                                     break;
                                 }
                             }
                             const int yi = static_cast<int>(y);
                             out.color.set(x, yi, static_cast<float>(acc.color.x()),
                                           static_cast<float>(acc.color.y()),
                                           static_cast<float>(acc.color.z()));
                             out.alpha.set(x, yi, std::clamp(acc.alpha, 0.0, 1.0));
                             out.depth_raw.values[out.depth_raw.index(x, yi)] = acc.depth_raw;
                             out.depth_raw.valid[out.depth_raw.index(x, yi)] =
                                 acc.alpha > options.validity_threshold;
                             if (acc.alpha > options.validity_threshold) {
                                 out.depth.set(x, yi, acc.depth_raw / acc.alpha);
                             }
                         }
                     }
                 });
    return out;
}

/// Mask of pixels whose accumulated alpha reaches `threshold` (NeRF-Stereo's
/// validity filter).
inline Mask alpha_filter_mask(const AlphaMap& alpha_map, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw ValidationError("alpha_filter_mask: threshold must be in [0, 1]");
    }
    Mask mask(alpha_map.width, alpha_map.height);
    for (std::size_t i = 0; i < alpha_map.size(); ++i) {
        mask.data[i] = alpha_map.values[i] >= threshold ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Mesh depth rendering
// ---------------------------------------------------------------------------

/// Per-pixel nearest-hit z-depth of the mesh; invalid where the ray misses.
inline DepthMap raycast_depth(const AcceleratedMesh& accel, const CameraIntrinsics& intr,
                              const PosedImage& pose, int jobs = 0) {
    DepthMap depth(intr.width, intr.height);
    const Eigen::Matrix3d rot = pose.rotation_matrix();
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
                             // Camera-frame z of the hit point; the origin is
                             // the camera center, so this is t * (R d).z.
                             const double z = hit->t * (rot * ray.direction).z();
                             depth.set(x, static_cast<int>(y), z);
                         }
                     }
                 });
    return depth;
}

}  // namespace stereogen
