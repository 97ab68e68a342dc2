#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stereogen/common.hpp"
#include "stereogen/ply.hpp"

namespace stereogen {

struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::map<std::string, std::vector<double>> vertex_attributes;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
};

/// Length of the axis-aligned bounding box diagonal; 0 for empty meshes.
inline double bounding_diagonal(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) {
        return 0.0;
    }
    Eigen::Vector3d lo = mesh.vertices.front();
    Eigen::Vector3d hi = lo;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

/// Area-weighted vertex normals (sum of incident face cross products,
/// normalized). Vertices with no incident area keep a zero normal.
inline std::vector<Eigen::Vector3d> vertex_normals(const TriangleMesh& mesh) {
    std::vector<Eigen::Vector3d> normals(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& f : mesh.faces) {
        const Eigen::Vector3d& a = mesh.vertices[f[0]];
        const Eigen::Vector3d& b = mesh.vertices[f[1]];
        const Eigen::Vector3d& c = mesh.vertices[f[2]];
        const Eigen::Vector3d weighted = (b - a).cross(c - a);  // 2x area times unit normal
        normals[f[0]] += weighted;
        normals[f[1]] += weighted;
        normals[f[2]] += weighted;
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (len > 0.0) {
            n /= len;
        }
    }
    return normals;
}

namespace detail {

inline void append_face_fan(TriangleMesh& mesh, const std::vector<std::uint32_t>& polygon,
                            const std::string& ctx) {
    if (polygon.size() < 3) {
        throw ParseError("face with fewer than 3 vertices in " + ctx);
    }
    for (std::uint32_t idx : polygon) {
        if (idx >= mesh.vertices.size()) {
            throw ParseError("face index " + std::to_string(idx) + " out of range in " + ctx);
        }
    }
    for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
        std::array<std::uint32_t, 3> f{polygon[0], polygon[k], polygon[k + 1]};
        if (f[0] == f[1] && f[1] == f[2]) {
            continue;  // fully degenerate
        }
        mesh.faces.push_back(f);
    }
}

inline TriangleMesh load_mesh_ply(const std::filesystem::path& path) {
    const ply::File file = ply::read(path);
    const ply::ElementData* vertex = file.element("vertex");
    if (!vertex) {
        throw ParseError("PLY has no vertex element: " + path.string());
    }
    const auto* xs = vertex->column("x");
    const auto* ys = vertex->column("y");
    const auto* zs = vertex->column("z");
    if (!xs || !ys || !zs) {
        throw ParseError("PLY vertex element lacks x/y/z: " + path.string());
    }

    TriangleMesh mesh;
    mesh.vertices.resize(vertex->schema.count);
    for (std::size_t i = 0; i < vertex->schema.count; ++i) {
        mesh.vertices[i] = Eigen::Vector3d((*xs)[i], (*ys)[i], (*zs)[i]);
    }
    // Any other scalar per-vertex property rides along as an attribute.
    for (std::size_t p = 0; p < vertex->schema.properties.size(); ++p) {
        const ply::Property& prop = vertex->schema.properties[p];
        if (prop.is_list || prop.name == "x" || prop.name == "y" || prop.name == "z") {
            continue;
        }
        mesh.vertex_attributes[prop.name] = vertex->columns[p];
    }

    if (const ply::ElementData* face = file.element("face")) {
        int list_idx = face->property_index("vertex_indices");
        if (list_idx < 0) {
            list_idx = face->property_index("vertex_index");
        }
        if (list_idx < 0) {
            throw ParseError("PLY face element lacks vertex_indices: " + path.string());
        }
        for (const auto& entry : face->lists[list_idx]) {
            std::vector<std::uint32_t> polygon(entry.size());
            for (std::size_t k = 0; k < entry.size(); ++k) {
                if (entry[k] < 0) {
                    throw ParseError("negative face index in " + path.string());
                }
                polygon[k] = static_cast<std::uint32_t>(entry[k]);
            }
            append_face_fan(mesh, polygon, path.string());
        }
    }
    return mesh;
}

inline TriangleMesh load_mesh_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    TriangleMesh mesh;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) {
            continue;
        }
        if (tag == "v") {
            Eigen::Vector3d v;
            if (!(ss >> v.x() >> v.y() >> v.z())) {
                throw ParseError(path.string() + ":" + std::to_string(number) + ": malformed vertex");
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::uint32_t> polygon;
            std::string token;
            while (ss >> token) {
                // "i", "i/j", "i//k", "i/j/k"; only the position index matters.
                const std::string index_part = token.substr(0, token.find('/'));
                long idx = 0;
                try {
                    idx = std::stol(index_part);
                } catch (const std::exception&) {
                    throw ParseError(path.string() + ":" + std::to_string(number) +
                                     ": malformed face index '" + token + "'");
                }
                if (idx < 0) {
                    idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
                }
                if (idx <= 0) {
                    throw ParseError(path.string() + ":" + std::to_string(number) +
                                     ": face index out of range");
                }
                polygon.push_back(static_cast<std::uint32_t>(idx - 1));  // OBJ is 1-based
            }
            append_face_fan(mesh, polygon, path.string() + ":" + std::to_string(number));
        }
        // All other record types (vt, vn, usemtl, ...) are ignored.
    }
    return mesh;
}

}  // namespace detail

/// Loads a triangle mesh from PLY (ascii / binary little-endian) or OBJ,
/// chosen by extension. Polygon faces are fan-triangulated.
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    TriangleMesh mesh;
    if (ext == ".ply") {
        mesh = detail::load_mesh_ply(path);
    } else if (ext == ".obj") {
        mesh = detail::load_mesh_obj(path);
    } else {
        throw ParseError("unsupported mesh format '" + ext + "' for " + path.string());
    }
    for (const auto& [name, attr] : mesh.vertex_attributes) {
        if (attr.size() != mesh.vertices.size()) {
            throw ParseError("attribute '" + name + "' size mismatch in " + path.string());
        }
    }
    return mesh;
}

/// Writes a mesh as PLY. Positions are float32; attributes named
/// red/green/blue are written as uchar, all others as float32.
inline void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh,
                      bool binary = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const auto is_color = [](const std::string& name) {
        return name == "red" || name == "green" || name == "blue";
    };
    // Colors go out in the conventional red/green/blue order, other
    // attributes after them.
    std::vector<std::pair<std::string, const std::vector<double>*>> ordered;
    for (const char* name : {"red", "green", "blue"}) {
        if (auto it = mesh.vertex_attributes.find(name); it != mesh.vertex_attributes.end()) {
            ordered.emplace_back(it->first, &it->second);
        }
    }
    for (const auto& [name, attr] : mesh.vertex_attributes) {
        if (!is_color(name)) {
            ordered.emplace_back(name, &attr);
        }
    }

    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    for (const auto& [name, attr] : ordered) {
        if (attr->size() != mesh.vertices.size()) {
            throw ValidationError("attribute '" + name + "' size mismatch");
        }
        out << "property " << (is_color(name) ? "uchar " : "float ") << name << "\n";
    }
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";

    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (binary) {
            for (int a = 0; a < 3; ++a) {
                ply::detail::write_binary_value(out, ply::Type::kFloat, mesh.vertices[i][a]);
            }
            for (const auto& [name, attr] : ordered) {
                ply::detail::write_binary_value(
                    out, is_color(name) ? ply::Type::kUChar : ply::Type::kFloat, (*attr)[i]);
            }
        } else {
            out << static_cast<float>(mesh.vertices[i].x()) << " "
                << static_cast<float>(mesh.vertices[i].y()) << " "
                << static_cast<float>(mesh.vertices[i].z());
            for (const auto& [name, attr] : ordered) {
                if (is_color(name)) {
                    out << " " << static_cast<int>(static_cast<std::uint8_t>((*attr)[i]));
                } else {
                    out << " " << static_cast<float>((*attr)[i]);
                }
            }
            out << "\n";
        }
    }
    for (const auto& f : mesh.faces) {
        if (binary) {
            ply::detail::write_binary_value(out, ply::Type::kUChar, 3);
            for (int a = 0; a < 3; ++a) {
                ply::detail::write_binary_value(out, ply::Type::kInt, f[a]);
            }
        } else {
            out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
        }
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

// ---------------------------------------------------------------------------
// Largest-cluster filtering
// ---------------------------------------------------------------------------

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Partitions faces into connectivity clusters; two faces are connected when
/// they share at least one vertex. Clusters are sorted by descending face
/// count, ties by ascending minimum face index.
inline std::vector<std::vector<std::uint32_t>> connected_components(const TriangleMesh& mesh) {
    detail::UnionFind uf(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        uf.unite(f[0], f[1]);
        uf.unite(f[0], f[2]);
    }
    std::map<std::size_t, std::vector<std::uint32_t>> by_root;
    for (std::uint32_t i = 0; i < mesh.faces.size(); ++i) {
        by_root[uf.find(mesh.faces[i][0])].push_back(i);
    }
    std::vector<std::vector<std::uint32_t>> components;
    components.reserve(by_root.size());
    for (auto& [root, faces] : by_root) {
        components.push_back(std::move(faces));
    }
    std::sort(components.begin(), components.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) {
            return a.size() > b.size();
        }
        return a.front() < b.front();  // face lists are ascending by construction
    });
    return components;
}

/// Keeps only the largest connectivity cluster (TSDF-fusion reconstructions
/// tend to leave floating debris). Unreferenced vertices are dropped and
/// attributes reindexed. Ties go to the cluster with the lowest face index.
inline TriangleMesh keep_largest_cluster(const TriangleMesh& mesh) {
    if (mesh.faces.empty()) {
        throw ValidationError("keep_largest_cluster: mesh has no faces");
    }
    const auto components = connected_components(mesh);
    const std::vector<std::uint32_t>& keep = components.front();

    constexpr std::uint32_t kUnused = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(mesh.vertices.size(), kUnused);
    TriangleMesh out;
    out.faces.reserve(keep.size());
    for (std::uint32_t face_idx : keep) {
        std::array<std::uint32_t, 3> f{};
        for (int a = 0; a < 3; ++a) {
            const std::uint32_t old = mesh.faces[face_idx][a];
            if (remap[old] == kUnused) {
                remap[old] = static_cast<std::uint32_t>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[old]);
            }
            f[a] = remap[old];
        }
        out.faces.push_back(f);
    }
    for (const auto& [name, attr] : mesh.vertex_attributes) {
        std::vector<double> mapped(out.vertices.size());
        for (std::size_t old = 0; old < remap.size(); ++old) {
            if (remap[old] != kUnused) {
                mapped[remap[old]] = attr[old];
            }
        }
        out.vertex_attributes[name] = std::move(mapped);
    }
    return out;
}

}  // namespace stereogen
