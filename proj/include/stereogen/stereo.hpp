#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "stereogen/colmap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/image.hpp"

namespace stereogen {

/// Rectified virtual stereo pair: shared intrinsics, identical rotation,
/// right camera translated by +baseline along the left camera's x-axis.
struct StereoRig {
    PosedImage left;
    PosedImage right;
    double baseline = 0.0;  // world units
    CameraIntrinsics intrinsics;
};

/// Shifts the camera center by `baseline` along the left camera's +x axis.
/// In the world-to-camera convention that is t_right = t_left - (b, 0, 0).
inline PosedImage make_right_camera(const PosedImage& left, double baseline) {
    if (!(baseline > 0.0)) {
        throw ValidationError("make_right_camera: baseline must be positive");
    }
    PosedImage right = left;
    right.translation.x() -= baseline;
    return right;
}

inline StereoRig make_rig(const CameraIntrinsics& intrinsics, const PosedImage& left,
                          double baseline) {
    StereoRig rig;
    rig.left = left;
    rig.right = make_right_camera(left, baseline);
    rig.baseline = baseline;
    rig.intrinsics = intrinsics;
    return rig;
}

/// d = f * b / z. Non-finite or non-positive depths are invalidated.
inline DisparityMap depth_to_disparity(const DepthMap& depth, double focal_px, double baseline) {
    if (!(focal_px > 0.0) || !(baseline > 0.0)) {
        throw ValidationError("depth_to_disparity: f and b must be positive");
    }
    DisparityMap disp(depth.width, depth.height);
    const double fb = focal_px * baseline;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double z = depth.values[i];
        if (depth.valid[i] && std::isfinite(z) && z > 0.0) {
            disp.values[i] = fb / z;
            disp.valid[i] = 1;
        }
    }
    return disp;
}

/// z = f * b / d, the inverse mapping on valid pixels.
inline DepthMap disparity_to_depth(const DisparityMap& disp, double focal_px, double baseline) {
    if (!(focal_px > 0.0) || !(baseline > 0.0)) {
        throw ValidationError("disparity_to_depth: f and b must be positive");
    }
    DepthMap depth(disp.width, disp.height);
    const double fb = focal_px * baseline;
    for (std::size_t i = 0; i < disp.size(); ++i) {
        const double d = disp.values[i];
        if (disp.valid[i] && std::isfinite(d) && d > 0.0) {
            depth.values[i] = fb / d;
            depth.valid[i] = 1;
        }
    }
    return depth;
}

/// Left-right consistency mask (1 = non-occluded): a left pixel survives when
/// its match u - d lands inside the right image and the right disparity there
/// agrees within tolerance_px (nearest-pixel lookup).
inline Mask occlusion_mask(const DisparityMap& left_disp, const DisparityMap& right_disp,
                           double tolerance_px = 1.0) {
    if (left_disp.width != right_disp.width || left_disp.height != right_disp.height) {
        throw ValidationError("occlusion_mask: map sizes differ");
    }
    if (!(tolerance_px > 0.0)) {
        throw ValidationError("occlusion_mask: tolerance must be positive");
    }
    Mask mask(left_disp.width, left_disp.height);
    for (int y = 0; y < left_disp.height; ++y) {
        for (int x = 0; x < left_disp.width; ++x) {
            if (!left_disp.is_valid(x, y)) {
                continue;
            }
            const double d = left_disp.at(x, y);
            const int xr = static_cast<int>(std::lround(x - d));
            if (xr < 0 || xr >= right_disp.width || !right_disp.is_valid(xr, y)) {
                continue;
            }
            if (std::abs(d - right_disp.at(xr, y)) <= tolerance_px) {
                mask.set(x, y, true);
            }
        }
    }
    return mask;
}

struct HistogramBin {
    double start = 0.0;  // bin covers [start, start + width)
    std::size_t count = 0;
};

/// Histogram over valid pixels; only non-empty bins are returned, in
/// ascending order. Total count equals the number of valid pixels.
inline std::vector<HistogramBin> disparity_histogram(const DisparityMap& disp,
                                                     double bin_width_px) {
    if (!(bin_width_px > 0.0)) {
        throw ValidationError("disparity_histogram: bin width must be positive");
    }
    std::map<long, std::size_t> bins;
    for (std::size_t i = 0; i < disp.size(); ++i) {
        if (disp.valid[i]) {
            ++bins[static_cast<long>(std::floor(disp.values[i] / bin_width_px))];
        }
    }
    std::vector<HistogramBin> out;
    out.reserve(bins.size());
    for (const auto& [k, count] : bins) {
        out.push_back({k * bin_width_px, count});
    }
    return out;
}

/// Median of the valid pixels; throws when none are valid.
inline double median_valid(const FloatGrid& grid) {
    std::vector<double> vals;
    vals.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.valid[i]) {
            vals.push_back(grid.values[i]);
        }
    }
    if (vals.empty()) {
        throw ValidationError("median_valid: no valid pixels");
    }
    const std::size_t mid = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    return vals[mid];
}

/// Baseline that would map the median depth to a target median disparity:
/// b = d_target * z_median / f. A starting point for matching the disparity
/// distribution of a reference dataset.
inline double suggest_baseline(double target_median_disparity_px, double median_depth,
                               double focal_px) {
    if (!(target_median_disparity_px > 0.0) || !(median_depth > 0.0) || !(focal_px > 0.0)) {
        throw ValidationError("suggest_baseline: all inputs must be positive");
    }
    return target_median_disparity_px * median_depth / focal_px;
}

}  // namespace stereogen
