#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "stereogen/colmap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/mesh.hpp"

namespace stereogen {

struct Hit {
    double t = 0.0;
    std::uint32_t face_index = 0;
    Eigen::Vector3d barycentric{0.0, 0.0, 0.0};  // weights of v0, v1, v2
    Eigen::Vector3d geometric_normal{0.0, 0.0, 0.0};
};

struct BvhNode {
    Eigen::Vector3d lo{0.0, 0.0, 0.0};
    Eigen::Vector3d hi{0.0, 0.0, 0.0};
    std::int32_t left = -1;   // internal nodes only
    std::int32_t right = -1;
    std::uint32_t first = 0;  // leaf range into primitive order
    std::uint32_t count = 0;  // > 0 marks a leaf
};

/// Immutable triangle mesh plus a binned-SAH BVH. Queries are pure and safe
/// to call from any number of threads.
class AcceleratedMesh {
public:
    static constexpr double kRayEpsilon = 1e-9;       // self-intersection guard on t
    static constexpr double kEdgeTolerance = 1e-9;    // inclusive barycentric tolerance
    static constexpr int kMaxLeafSize = 4;

    explicit AcceleratedMesh(TriangleMesh mesh) : mesh_(std::move(mesh)) {
        if (mesh_.faces.empty()) {
            throw ValidationError("build_bvh: mesh has no faces");
        }
        build();
    }

    const TriangleMesh& mesh() const { return mesh_; }
    const std::vector<BvhNode>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& primitive_order() const { return prim_order_; }
    double scene_diagonal() const { return diagonal_; }

    /// Epsilon that keeps a vertex's own incident faces from occluding it.
    double default_occlusion_epsilon() const { return 1e-4 * diagonal_; }

    /// Nearest hit with t in (kRayEpsilon, t_max); absent when none.
    std::optional<Hit> intersect(const Ray& ray, double t_max = kInfinity) const {
        if (!(t_max > 0.0)) {
            throw ValidationError("intersect: t_max must be positive");
        }
        std::optional<Hit> best;
        double limit = t_max;
        traverse(ray.origin, ray.direction, kRayEpsilon, limit, [&](const Triangle& tri) {
            double t, b1, b2;
            if (intersect_triangle(tri, ray.origin, ray.direction, kRayEpsilon, limit, t, b1, b2)) {
                Hit hit;
                hit.t = t;
                hit.face_index = tri.face;
                hit.barycentric = Eigen::Vector3d(1.0 - b1 - b2, b1, b2);
                hit.geometric_normal = tri.e1.cross(tri.e2).normalized();
                best = hit;
                limit = t;
            }
            return false;  // keep searching for a nearer hit
        });
        return best;
    }

    /// True when any surface lies strictly between `from` and `to`, with an
    /// epsilon margin at both endpoints (so endpoints on the mesh itself do
    /// not self-occlude).
    bool is_occluded(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                     double epsilon) const {
        if (!(epsilon > 0.0)) {
            throw ValidationError("is_occluded: epsilon must be positive");
        }
        const Eigen::Vector3d delta = to - from;
        const double dist = delta.norm();
        if (dist == 0.0) {
            throw ValidationError("is_occluded: endpoints coincide");
        }
        const Eigen::Vector3d dir = delta / dist;
        const double t_hi = dist - epsilon;
        if (t_hi <= epsilon) {
            return false;  // margins swallow the whole segment
        }
        bool occluded = false;
        double limit = t_hi;
        traverse(from, dir, epsilon, limit, [&](const Triangle& tri) {
            double t, b1, b2;
            if (intersect_triangle(tri, from, dir, epsilon, t_hi, t, b1, b2)) {
                occluded = true;
                return true;  // any hit suffices
            }
            return false;
        });
        return occluded;
    }

private:
    static constexpr double kInfinity = std::numeric_limits<double>::infinity();

    struct Triangle {
        Eigen::Vector3d v0, e1, e2;
        std::uint32_t face = 0;
    };

    // Moller-Trumbore with an inclusive edge tolerance; exact watertightness
    // is not required because occlusion epsilons dominate.
    static bool intersect_triangle(const Triangle& tri, const Eigen::Vector3d& origin,
                                   const Eigen::Vector3d& dir, double t_min, double t_max,
                                   double& t, double& b1, double& b2) {
        const Eigen::Vector3d pvec = dir.cross(tri.e2);
        const double det = tri.e1.dot(pvec);
        if (std::abs(det) < 1e-12) {
            return false;  // parallel to the triangle plane
        }
        const double inv_det = 1.0 / det;
        const Eigen::Vector3d tvec = origin - tri.v0;
        b1 = tvec.dot(pvec) * inv_det;
        if (b1 < -kEdgeTolerance || b1 > 1.0 + kEdgeTolerance) {
            return false;
        }
        const Eigen::Vector3d qvec = tvec.cross(tri.e1);
        b2 = dir.dot(qvec) * inv_det;
        if (b2 < -kEdgeTolerance || b1 + b2 > 1.0 + kEdgeTolerance) {
            return false;
        }
        t = tri.e2.dot(qvec) * inv_det;
        return t > t_min && t < t_max;
    }

    static bool slab_hit(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                         const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                         double t_min, double t_max, double& entry) {
        double t_near = t_min;
        double t_far = t_max;
        for (int a = 0; a < 3; ++a) {
            if (dir[a] == 0.0) {
                if (origin[a] < lo[a] || origin[a] > hi[a]) {
                    return false;
                }
                continue;
            }
            const double inv = 1.0 / dir[a];
            double t0 = (lo[a] - origin[a]) * inv;
            double t1 = (hi[a] - origin[a]) * inv;
            if (t0 > t1) {
                std::swap(t0, t1);
            }
            t_near = std::max(t_near, t0);
            t_far = std::min(t_far, t1 * (1.0 + 1e-12) + 1e-300);  // conservative pad
        }
        entry = t_near;
        return t_near <= t_far;
    }

    template <typename LeafFn>
    void traverse(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double t_min,
                  double& t_max, LeafFn&& on_triangle) const {
        std::array<std::int32_t, 128> stack;
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const BvhNode& node = nodes_[stack[--top]];
            double entry;
            if (!slab_hit(node.lo, node.hi, origin, dir, t_min, t_max, entry)) {
                continue;
            }
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                    if (on_triangle(triangles_[i])) {
                        return;
                    }
                }
                continue;
            }
            // Visit the nearer child first so the far one can be pruned.
            double entry_l = kInfinity, entry_r = kInfinity;
            const bool hit_l =
                slab_hit(nodes_[node.left].lo, nodes_[node.left].hi, origin, dir, t_min, t_max, entry_l);
            const bool hit_r = slab_hit(nodes_[node.right].lo, nodes_[node.right].hi, origin, dir,
                                        t_min, t_max, entry_r);
            if (hit_l && hit_r) {
                const std::int32_t near = entry_l <= entry_r ? node.left : node.right;
                const std::int32_t far = entry_l <= entry_r ? node.right : node.left;
                stack[top++] = far;
                stack[top++] = near;
            } else if (hit_l) {
                stack[top++] = node.left;
            } else if (hit_r) {
                stack[top++] = node.right;
            }
        }
    }

    void build() {
        const std::size_t n = mesh_.faces.size();
        std::vector<Eigen::Vector3d> prim_lo(n), prim_hi(n), centroids(n);
        Eigen::Vector3d scene_lo = mesh_.vertices.front();
        Eigen::Vector3d scene_hi = scene_lo;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = mesh_.faces[i];
            const Eigen::Vector3d& a = mesh_.vertices[f[0]];
            const Eigen::Vector3d& b = mesh_.vertices[f[1]];
            const Eigen::Vector3d& c = mesh_.vertices[f[2]];
            prim_lo[i] = a.cwiseMin(b).cwiseMin(c);
            prim_hi[i] = a.cwiseMax(b).cwiseMax(c);
            centroids[i] = (prim_lo[i] + prim_hi[i]) * 0.5;
        }
        for (const auto& v : mesh_.vertices) {
            scene_lo = scene_lo.cwiseMin(v);
            scene_hi = scene_hi.cwiseMax(v);
        }
        diagonal_ = (scene_hi - scene_lo).norm();

        prim_order_.resize(n);
        std::iota(prim_order_.begin(), prim_order_.end(), 0u);
        nodes_.reserve(2 * n);
        build_node(prim_lo, prim_hi, centroids, 0, n, 0);

        triangles_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = mesh_.faces[prim_order_[i]];
            triangles_[i].v0 = mesh_.vertices[f[0]];
            triangles_[i].e1 = mesh_.vertices[f[1]] - triangles_[i].v0;
            triangles_[i].e2 = mesh_.vertices[f[2]] - triangles_[i].v0;
            triangles_[i].face = prim_order_[i];
        }
    }

    std::int32_t build_node(const std::vector<Eigen::Vector3d>& prim_lo,
                            const std::vector<Eigen::Vector3d>& prim_hi,
                            const std::vector<Eigen::Vector3d>& centroids, std::size_t begin,
                            std::size_t end, int depth) {
        const auto node_index = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();
        Eigen::Vector3d lo = prim_lo[prim_order_[begin]];
        Eigen::Vector3d hi = prim_hi[prim_order_[begin]];
        Eigen::Vector3d c_lo = centroids[prim_order_[begin]];
        Eigen::Vector3d c_hi = c_lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(prim_lo[prim_order_[i]]);
            hi = hi.cwiseMax(prim_hi[prim_order_[i]]);
            c_lo = c_lo.cwiseMin(centroids[prim_order_[i]]);
            c_hi = c_hi.cwiseMax(centroids[prim_order_[i]]);
        }
        nodes_[node_index].lo = lo;
        nodes_[node_index].hi = hi;

        const std::size_t count = end - begin;
        if (count <= kMaxLeafSize) {
            nodes_[node_index].first = static_cast<std::uint32_t>(begin);
            nodes_[node_index].count = static_cast<std::uint32_t>(count);
            return node_index;
        }

        // Past depth 48 force median splits so the traversal stack bound of
        // 128 holds even for adversarial SAH chains.
        std::size_t mid = depth < 48
                              ? partition_sah(prim_lo, prim_hi, centroids, begin, end, c_lo, c_hi)
                              : begin;
        if (mid == begin || mid == end) {
            // Degenerate centroid spread (or depth cap); median split.
            mid = begin + count / 2;
            const int axis = largest_axis(c_hi - c_lo);
            std::nth_element(prim_order_.begin() + begin, prim_order_.begin() + mid,
                             prim_order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 return centroids[a][axis] < centroids[b][axis];
                             });
        }
        const std::int32_t left = build_node(prim_lo, prim_hi, centroids, begin, mid, depth + 1);
        const std::int32_t right = build_node(prim_lo, prim_hi, centroids, mid, end, depth + 1);
        nodes_[node_index].left = left;
        nodes_[node_index].right = right;
        return node_index;
    }

    static int largest_axis(const Eigen::Vector3d& extent) {
        int axis = 0;
        if (extent.y() > extent.x()) axis = 1;
        if (extent.z() > extent[axis]) axis = 2;
        return axis;
    }

    static double half_area(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
        const Eigen::Vector3d d = (hi - lo).cwiseMax(0.0);
        return d.x() * d.y() + d.y() * d.z() + d.z() * d.x();
    }

    // Binned SAH split along the axis of largest centroid extent; returns the
    // partition point, or `begin` when no useful split exists.
    std::size_t partition_sah(const std::vector<Eigen::Vector3d>& prim_lo,
                              const std::vector<Eigen::Vector3d>& prim_hi,
                              const std::vector<Eigen::Vector3d>& centroids, std::size_t begin,
                              std::size_t end, const Eigen::Vector3d& c_lo,
                              const Eigen::Vector3d& c_hi) {
        constexpr int kBins = 16;
        const int axis = largest_axis(c_hi - c_lo);
        const double extent = c_hi[axis] - c_lo[axis];
        if (extent <= 0.0) {
            return begin;
        }
        struct Bin {
            Eigen::Vector3d lo{kInfinity, kInfinity, kInfinity};
            Eigen::Vector3d hi{-kInfinity, -kInfinity, -kInfinity};
            std::size_t count = 0;
        };
        std::array<Bin, kBins> bins;
        const double scale = kBins / extent;
        auto bin_of = [&](std::uint32_t prim) {
            const int b = static_cast<int>((centroids[prim][axis] - c_lo[axis]) * scale);
            return std::clamp(b, 0, kBins - 1);
        };
        for (std::size_t i = begin; i < end; ++i) {
            Bin& bin = bins[bin_of(prim_order_[i])];
            bin.lo = bin.lo.cwiseMin(prim_lo[prim_order_[i]]);
            bin.hi = bin.hi.cwiseMax(prim_hi[prim_order_[i]]);
            ++bin.count;
        }

        std::array<double, kBins - 1> left_cost{}, right_cost{};
        Eigen::Vector3d lo = bins[0].lo, hi = bins[0].hi;
        std::size_t cnt = 0;
        for (int i = 0; i < kBins - 1; ++i) {
            lo = lo.cwiseMin(bins[i].lo);
            hi = hi.cwiseMax(bins[i].hi);
            cnt += bins[i].count;
            left_cost[i] = cnt > 0 ? half_area(lo, hi) * static_cast<double>(cnt) : 0.0;
        }
        lo = bins[kBins - 1].lo;
        hi = bins[kBins - 1].hi;
        cnt = 0;
        for (int i = kBins - 1; i > 0; --i) {
            lo = lo.cwiseMin(bins[i].lo);
            hi = hi.cwiseMax(bins[i].hi);
            cnt += bins[i].count;
            right_cost[i - 1] = cnt > 0 ? half_area(lo, hi) * static_cast<double>(cnt) : 0.0;
        }
        int best_split = -1;
        double best = kInfinity;
        for (int i = 0; i < kBins - 1; ++i) {
            const double cost = left_cost[i] + right_cost[i];
            if (cost < best) {
                best = cost;
                best_split = i;
            }
        }
        if (best_split < 0) {
            return begin;
        }
        auto it = std::partition(prim_order_.begin() + begin, prim_order_.begin() + end,
                                 [&](std::uint32_t prim) { return bin_of(prim) <= best_split; });
        return static_cast<std::size_t>(it - prim_order_.begin());
    }

    TriangleMesh mesh_;
    std::vector<std::uint32_t> prim_order_;
    std::vector<Triangle> triangles_;
    std::vector<BvhNode> nodes_;
    double diagonal_ = 0.0;
};

inline AcceleratedMesh build_bvh(TriangleMesh mesh) { return AcceleratedMesh(std::move(mesh)); }

}  // namespace stereogen
