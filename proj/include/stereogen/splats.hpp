#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "stereogen/common.hpp"
#include "stereogen/ply.hpp"

namespace stereogen {

/// Degree-0 spherical-harmonic basis constant.
inline constexpr double kShC0 = 0.28209479177387814;

struct Splat {
    Eigen::Vector3d mean{0.0, 0.0, 0.0};
    Eigen::Vector3d scale{1.0, 1.0, 1.0};  // per-axis standard deviation, world units
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
    double opacity = 1.0;                  // in [0, 1]
    Eigen::Vector3d color{0.0, 0.0, 0.0};  // rgb in [0, 1]
};

struct SplatScene {
    std::vector<Splat> splats;
};

/// Loads a Gaussian-splat PLY in the reference 3DGS layout and applies the
/// stored activations: opacity through a logistic, scales out of log space,
/// rotation normalized, DC spherical harmonics to rgb. Higher-order SH
/// coefficients are skipped.
inline SplatScene load_splats(const std::filesystem::path& path) {
    static const std::vector<std::string> kRequired = {
        "x",    "y",     "z",     "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",  "f_dc_0",  "f_dc_1",  "f_dc_2"};

    const ply::File file = ply::read(path, [](const std::string& element, const std::string& prop) {
        if (element != "vertex") {
            return false;
        }
        return std::find(kRequired.begin(), kRequired.end(), prop) != kRequired.end();
    });
    const ply::ElementData* vertex = file.element("vertex");
    if (!vertex) {
        throw ParseError("splat PLY has no vertex element: " + path.string());
    }
    std::vector<const std::vector<double>*> cols;
    cols.reserve(kRequired.size());
    for (const std::string& name : kRequired) {
        const auto* col = vertex->column(name);
        if (!col) {
            throw ParseError("splat PLY missing property '" + name + "': " + path.string());
        }
        cols.push_back(col);
    }

    const std::size_t n = vertex->schema.count;
    SplatScene scene;
    scene.splats.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Splat& s = scene.splats[i];
        s.mean = Eigen::Vector3d((*cols[0])[i], (*cols[1])[i], (*cols[2])[i]);
        s.opacity = 1.0 / (1.0 + std::exp(-(*cols[3])[i]));
        s.scale = Eigen::Vector3d(std::exp((*cols[4])[i]), std::exp((*cols[5])[i]),
                                  std::exp((*cols[6])[i]));
        Eigen::Quaterniond q((*cols[7])[i], (*cols[8])[i], (*cols[9])[i], (*cols[10])[i]);
        const double norm = q.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw ParseError("splat " + std::to_string(i) + ": degenerate rotation in " +
                             path.string());
        }
        q.normalize();
        s.rotation = q;
        for (int c = 0; c < 3; ++c) {
            s.color[c] = std::clamp(0.5 + kShC0 * (*cols[11 + c])[i], 0.0, 1.0);
        }
    }
    return scene;
}

}  // namespace stereogen
