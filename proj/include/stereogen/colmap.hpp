#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stereogen/common.hpp"

namespace stereogen {

// ---------------------------------------------------------------------------
// COLMAP sparse-model types
// ---------------------------------------------------------------------------

enum class CameraModel {
    kSimplePinhole,  // f, cx, cy
    kPinhole,        // fx, fy, cx, cy
    kSimpleRadial,   // f, cx, cy, k
    kOpenCV,         // fx, fy, cx, cy, k1, k2, p1, p2
};

inline const char* to_string(CameraModel model) {
    switch (model) {
        case CameraModel::kSimplePinhole: return "SIMPLE_PINHOLE";
        case CameraModel::kPinhole: return "PINHOLE";
        case CameraModel::kSimpleRadial: return "SIMPLE_RADIAL";
        case CameraModel::kOpenCV: return "OPENCV";
    }
    return "UNKNOWN";
}

/// Number of distortion coefficients stored beyond the focal/principal block.
inline int distortion_param_count(CameraModel model) {
    switch (model) {
        case CameraModel::kSimplePinhole: return 0;
        case CameraModel::kPinhole: return 0;
        case CameraModel::kSimpleRadial: return 1;
        case CameraModel::kOpenCV: return 4;
    }
    return 0;
}

struct CameraIntrinsics {
    int camera_id = 0;
    CameraModel model = CameraModel::kPinhole;
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::vector<double> distortion;  // parsed and kept, ignored by projection
};

/// World-to-camera pose: x_cam = R * x_world + t.
struct PosedImage {
    int image_id = 0;
    int camera_id = 0;
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
    Eigen::Vector3d translation{0.0, 0.0, 0.0};
    std::string name;

    Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
    Eigen::Vector3d camera_center() const {
        return -(rotation.toRotationMatrix().transpose() * translation);
    }
};

struct SceneModel {
    std::map<int, CameraIntrinsics> cameras;
    std::map<int, PosedImage> images;
};

struct Ray {
    Eigen::Vector3d origin;
    Eigen::Vector3d direction;  // unit length
};

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;  // camera-frame z
};

struct PrincipalPointWarning {
    int camera_id = 0;
    double offset_x = 0.0;  // |cx - width/2| in pixels
    double offset_y = 0.0;
    std::string message;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline CameraModel camera_model_from_name(const std::string& name, const std::string& context) {
    if (name == "SIMPLE_PINHOLE") return CameraModel::kSimplePinhole;
    if (name == "PINHOLE") return CameraModel::kPinhole;
    if (name == "SIMPLE_RADIAL") return CameraModel::kSimpleRadial;
    if (name == "OPENCV") return CameraModel::kOpenCV;
    throw ParseError("unknown camera model '" + name + "' in " + context);
}

inline CameraModel camera_model_from_id(int id, const std::string& context) {
    switch (id) {
        case 0: return CameraModel::kSimplePinhole;
        case 1: return CameraModel::kPinhole;
        case 2: return CameraModel::kSimpleRadial;
        case 4: return CameraModel::kOpenCV;
    }
    throw ParseError("unknown camera model id " + std::to_string(id) + " in " + context);
}

inline int camera_model_total_params(CameraModel model) {
    switch (model) {
        case CameraModel::kSimplePinhole: return 3;
        case CameraModel::kPinhole: return 4;
        case CameraModel::kSimpleRadial: return 4;
        case CameraModel::kOpenCV: return 8;
    }
    return 0;
}

inline CameraIntrinsics intrinsics_from_params(int camera_id, CameraModel model, int width,
                                               int height, const std::vector<double>& params,
                                               const std::string& context) {
    if (static_cast<int>(params.size()) != camera_model_total_params(model)) {
        throw ParseError("camera " + std::to_string(camera_id) + ": expected " +
                         std::to_string(camera_model_total_params(model)) + " params, got " +
                         std::to_string(params.size()) + " in " + context);
    }
    CameraIntrinsics intr;
    intr.camera_id = camera_id;
    intr.model = model;
    intr.width = width;
    intr.height = height;
    switch (model) {
        case CameraModel::kSimplePinhole:
            intr.fx = intr.fy = params[0];
            intr.cx = params[1];
            intr.cy = params[2];
            break;
        case CameraModel::kPinhole:
            intr.fx = params[0];
            intr.fy = params[1];
            intr.cx = params[2];
            intr.cy = params[3];
            break;
        case CameraModel::kSimpleRadial:
            intr.fx = intr.fy = params[0];
            intr.cx = params[1];
            intr.cy = params[2];
            intr.distortion = {params[3]};
            break;
        case CameraModel::kOpenCV:
            intr.fx = params[0];
            intr.fy = params[1];
            intr.cx = params[2];
            intr.cy = params[3];
            intr.distortion = {params[4], params[5], params[6], params[7]};
            break;
    }
    if (intr.width <= 0 || intr.height <= 0) {
        throw ParseError("camera " + std::to_string(camera_id) + ": non-positive image size in " +
                         context);
    }
    if (intr.fx <= 0.0 || intr.fy <= 0.0) {
        throw ParseError("camera " + std::to_string(camera_id) + ": non-positive focal length in " +
                         context);
    }
    return intr;
}

/// Non-comment, non-empty lines of a COLMAP text file, with original line numbers.
inline std::vector<std::pair<int, std::string>> significant_lines(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::pair<int, std::string>> lines;
    std::string line;
    int number = 0;
    while (std::getline(file, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        lines.emplace_back(number, line);
    }
    return lines;
}

template <typename T>
T read_pod(std::istream& in, const std::string& context) {
    T value;
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw ParseError("unexpected end of file at offset " +
                         std::to_string(static_cast<long long>(in.tellg())) + " in " + context);
    }
    return value;
}

inline std::string read_null_terminated(std::istream& in, const std::string& context) {
    std::string s;
    char c;
    while (in.get(c)) {
        if (c == '\0') {
            return s;
        }
        s.push_back(c);
    }
    throw ParseError("unterminated string in " + context);
}

}  // namespace detail

/// cameras.txt: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[].
inline std::map<int, CameraIntrinsics> read_cameras_text(const std::filesystem::path& path) {
    std::map<int, CameraIntrinsics> cameras;
    for (const auto& [number, line] : detail::significant_lines(path)) {
        std::istringstream ss(line);
        int camera_id = 0, width = 0, height = 0;
        std::string model_name;
        if (!(ss >> camera_id >> model_name >> width >> height)) {
            throw ParseError(path.string() + ":" + std::to_string(number) + ": malformed camera record");
        }
        CameraModel model = detail::camera_model_from_name(model_name, path.string());
        std::vector<double> params;
        double p;
        while (ss >> p) {
            params.push_back(p);
        }
        cameras[camera_id] =
            detail::intrinsics_from_params(camera_id, model, width, height, params,
                                           path.string() + ":" + std::to_string(number));
    }
    return cameras;
}

/// images.txt: two lines per image; the second (2D observations) is skipped.
inline std::map<int, PosedImage> read_images_text(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    std::map<int, PosedImage> images;
    std::string line;
    int number = 0;
    bool expecting_points = false;
    while (std::getline(file, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::size_t first = line.find_first_not_of(" \t");
        if (!expecting_points) {
            if (first == std::string::npos || line[first] == '#') {
                continue;
            }
            std::istringstream ss(line);
            PosedImage img;
            double qw, qx, qy, qz;
            if (!(ss >> img.image_id >> qw >> qx >> qy >> qz >> img.translation.x() >>
                  img.translation.y() >> img.translation.z() >> img.camera_id >> img.name)) {
                throw ParseError(path.string() + ":" + std::to_string(number) +
                                 ": malformed image record");
            }
            img.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
            images[img.image_id] = std::move(img);
            expecting_points = true;
        } else {
            // Observation line; may be empty. Content is intentionally dropped.
            expecting_points = false;
        }
    }
    return images;
}

/// cameras.bin, little-endian: u64 count; per camera i32 id, i32 model id,
/// u64 width, u64 height, f64 params.
inline std::map<int, CameraIntrinsics> read_cameras_binary(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    const std::string ctx = path.string();
    std::map<int, CameraIntrinsics> cameras;
    const std::uint64_t count = detail::read_pod<std::uint64_t>(file, ctx);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto camera_id = detail::read_pod<std::int32_t>(file, ctx);
        const auto model_id = detail::read_pod<std::int32_t>(file, ctx);
        const auto width = detail::read_pod<std::uint64_t>(file, ctx);
        const auto height = detail::read_pod<std::uint64_t>(file, ctx);
        CameraModel model = detail::camera_model_from_id(model_id, ctx);
        std::vector<double> params(detail::camera_model_total_params(model));
        for (double& p : params) {
            p = detail::read_pod<double>(file, ctx);
        }
        cameras[camera_id] = detail::intrinsics_from_params(
            camera_id, model, static_cast<int>(width), static_cast<int>(height), params, ctx);
    }
    return cameras;
}

/// images.bin, little-endian: u64 count; per image i32 id, 4xf64 quat wxyz,
/// 3xf64 translation, i32 camera id, null-terminated name, u64 point count,
/// then (f64, f64, u64) per 2D point, skipped.
inline std::map<int, PosedImage> read_images_binary(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    const std::string ctx = path.string();
    std::map<int, PosedImage> images;
    const std::uint64_t count = detail::read_pod<std::uint64_t>(file, ctx);
    for (std::uint64_t i = 0; i < count; ++i) {
        PosedImage img;
        img.image_id = detail::read_pod<std::int32_t>(file, ctx);
        const double qw = detail::read_pod<double>(file, ctx);
        const double qx = detail::read_pod<double>(file, ctx);
        const double qy = detail::read_pod<double>(file, ctx);
        const double qz = detail::read_pod<double>(file, ctx);
        img.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
        img.translation.x() = detail::read_pod<double>(file, ctx);
        img.translation.y() = detail::read_pod<double>(file, ctx);
        img.translation.z() = detail::read_pod<double>(file, ctx);
        img.camera_id = detail::read_pod<std::int32_t>(file, ctx);
        img.name = detail::read_null_terminated(file, ctx);
        const auto num_points = detail::read_pod<std::uint64_t>(file, ctx);
        file.seekg(static_cast<std::streamoff>(num_points) * 24, std::ios::cur);
        if (!file) {
            throw ParseError("truncated 2D point block in " + ctx);
        }
        images[img.image_id] = std::move(img);
    }
    return images;
}

/// Loads cameras.{bin|txt} + images.{bin|txt} from a COLMAP sparse-model
/// directory, preferring binary. Quaternions are renormalized; referential
/// integrity and name uniqueness are enforced.
inline SceneModel load_scene_model(const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    SceneModel model;
    const fs::path cameras_bin = directory / "cameras.bin";
    const fs::path cameras_txt = directory / "cameras.txt";
    const fs::path images_bin = directory / "images.bin";
    const fs::path images_txt = directory / "images.txt";

    if (fs::exists(cameras_bin)) {
        model.cameras = read_cameras_binary(cameras_bin);
    } else if (fs::exists(cameras_txt)) {
        model.cameras = read_cameras_text(cameras_txt);
    } else {
        throw IoError("no cameras.bin or cameras.txt in " + directory.string());
    }
    if (fs::exists(images_bin)) {
        model.images = read_images_binary(images_bin);
    } else if (fs::exists(images_txt)) {
        model.images = read_images_text(images_txt);
    } else {
        throw IoError("no images.bin or images.txt in " + directory.string());
    }

    std::set<std::string> names;
    for (auto& [id, img] : model.images) {
        const double norm = img.rotation.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw ParseError("image " + std::to_string(id) + ": degenerate quaternion");
        }
        img.rotation.normalize();
        if (!model.cameras.count(img.camera_id)) {
            throw ParseError("image " + std::to_string(id) + " references unknown camera " +
                             std::to_string(img.camera_id));
        }
        if (!names.insert(img.name).second) {
            throw ParseError("duplicate image name '" + img.name + "'");
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Flags cameras whose principal point strays from the image center by more
/// than tolerance_fraction of the image dimension. Off-center principal
/// points (typically from refinement) break downstream splat optimizers.
inline std::vector<PrincipalPointWarning> validate_principal_point(
    const SceneModel& model, double tolerance_fraction = 0.02) {
    if (!(tolerance_fraction > 0.0) || tolerance_fraction > 0.5) {
        throw ValidationError("tolerance_fraction must be in (0, 0.5]");
    }
    std::vector<PrincipalPointWarning> warnings;
    for (const auto& [id, intr] : model.cameras) {
        const double off_x = std::abs(intr.cx - intr.width / 2.0);
        const double off_y = std::abs(intr.cy - intr.height / 2.0);
        if (off_x > tolerance_fraction * intr.width || off_y > tolerance_fraction * intr.height) {
            PrincipalPointWarning w;
            w.camera_id = id;
            w.offset_x = off_x;
            w.offset_y = off_y;
            w.message = "camera " + std::to_string(id) + ": principal point off-center by (" +
                        std::to_string(off_x) + ", " + std::to_string(off_y) + ") px";
            warnings.push_back(std::move(w));
        }
    }
    return warnings;
}

// ---------------------------------------------------------------------------
// Pinhole geometry
//
// Pixel convention: pixel index (x, y) covers the continuous image-plane
// square [x, x+1) x [y, y+1); its center is at (x+0.5, y+0.5). camera_ray
// takes pixel-index coordinates and shoots through the center; project
// returns continuous coordinates (fx*X/Z + cx, fy*Y/Z + cy).
// ---------------------------------------------------------------------------

/// World-space ray through the center of pixel (px, py). Distortion
/// coefficients are ignored; the pipeline assumes undistorted inputs.
inline Ray camera_ray(const CameraIntrinsics& intr, const PosedImage& pose, double px, double py) {
    if (!std::isfinite(px) || !std::isfinite(py)) {
        throw ValidationError("camera_ray: non-finite pixel coordinates");
    }
    const double u = px + 0.5;
    const double v = py + 0.5;
    const Eigen::Vector3d dir_cam((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    const Eigen::Matrix3d rot = pose.rotation_matrix();
    Ray ray;
    ray.origin = -(rot.transpose() * pose.translation);
    ray.direction = (rot.transpose() * dir_cam).normalized();
    return ray;
}

/// Projects a world point; absent when behind the camera or outside the
/// image bounds. depth is the camera-frame z coordinate.
inline std::optional<Projection> project(const CameraIntrinsics& intr, const PosedImage& pose,
                                         const Eigen::Vector3d& point) {
    const Eigen::Vector3d cam = pose.rotation_matrix() * point + pose.translation;
    if (!(cam.z() > 0.0)) {
        return std::nullopt;
    }
    Projection p;
    p.u = intr.fx * cam.x() / cam.z() + intr.cx;
    p.v = intr.fy * cam.y() / cam.z() + intr.cy;
    p.depth = cam.z();
    if (p.u < 0.0 || p.u >= intr.width || p.v < 0.0 || p.v >= intr.height) {
        return std::nullopt;
    }
    return p;
}

/// Intrinsics for a render downscaled by `factor` (2 halves the resolution).
inline CameraIntrinsics scale_intrinsics(const CameraIntrinsics& intr, double factor) {
    if (!(factor > 0.0)) {
        throw ValidationError("scale factor must be positive");
    }
    CameraIntrinsics out = intr;
    out.width = std::max(1, static_cast<int>(std::lround(intr.width / factor)));
    out.height = std::max(1, static_cast<int>(std::lround(intr.height / factor)));
    out.fx = intr.fx / factor;
    out.fy = intr.fy / factor;
    out.cx = intr.cx / factor;
    out.cy = intr.cy / factor;
    return out;
}

}  // namespace stereogen
