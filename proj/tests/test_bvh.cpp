#include <gtest/gtest.h>

#include <random>

#include "stereogen/bvh.hpp"
#include "test_support.hpp"

using namespace stereogen;
namespace ts = testsupport;

TEST(Bvh, SingleTriangleIsSingleLeaf) {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    const AcceleratedMesh accel(mesh);
    ASSERT_EQ(accel.nodes().size(), 1u);
    EXPECT_EQ(accel.nodes()[0].count, 1u);
}

TEST(Bvh, EmptyMeshRejected) {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}};
    EXPECT_THROW(AcceleratedMesh{mesh}, ValidationError);
}

TEST(Bvh, CentroidRayHitsWithThirdBarycentrics) {
    TriangleMesh mesh;
    mesh.vertices = {{-1, -1, 3}, {1, -1, 3}, {0, 1, 3}};
    mesh.faces = {{0, 1, 2}};
    const AcceleratedMesh accel(mesh);
    const Eigen::Vector3d centroid =
        (mesh.vertices[0] + mesh.vertices[1] + mesh.vertices[2]) / 3.0;
    Ray ray{{centroid.x(), centroid.y(), 0.0}, {0, 0, 1}};
    const auto hit = accel.intersect(ray);
    ASSERT_TRUE(hit.has_value());
    EXPECT_NEAR(hit->t, 3.0, 1e-12);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(hit->barycentric[i], 1.0 / 3.0, 1e-9);
    }
    EXPECT_NEAR(hit->barycentric.sum(), 1.0, 1e-9);
    EXPECT_NEAR(hit->geometric_normal.norm(), 1.0, 1e-12);
}

TEST(Bvh, ParallelRayMisses) {
    TriangleMesh mesh;
    mesh.vertices = {{-1, -1, 3}, {1, -1, 3}, {0, 1, 3}};
    mesh.faces = {{0, 1, 2}};
    const AcceleratedMesh accel(mesh);
    Ray ray{{0, 0, 2.0}, {1, 0, 0}};  // parallel to the z=3 plane
    EXPECT_FALSE(accel.intersect(ray).has_value());
}

TEST(Bvh, TMaxCutsOffFartherHits) {
    TriangleMesh mesh = ts::make_quad(-1, 1, -1, 1, 5.0);
    const AcceleratedMesh accel(mesh);
    Ray ray{{0, 0, 0}, {0, 0, 1}};
    EXPECT_TRUE(accel.intersect(ray, 6.0).has_value());
    EXPECT_FALSE(accel.intersect(ray, 4.0).has_value());
    EXPECT_THROW(accel.intersect(ray, 0.0), ValidationError);
}

TEST(Bvh, NoHitAtOrBelowRayEpsilon) {
    TriangleMesh mesh;
    mesh.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    const AcceleratedMesh accel(mesh);
    // Origin exactly on the surface: t = 0 must not be reported.
    Ray away{{0.0, 0.0, 0.0}, {0, 0, 1}};
    EXPECT_FALSE(accel.intersect(away).has_value());
    Ray through{{0.0, 0.0, -1.0}, {0, 0, 1}};
    const auto hit = accel.intersect(through);
    ASSERT_TRUE(hit.has_value());
    EXPECT_GT(hit->t, AcceleratedMesh::kRayEpsilon);
}

TEST(Bvh, NodeBoxesContainChildrenAndPrimitives) {
    const TriangleMesh mesh = ts::make_heightfield(20, 5);  // 800 axis-aligned-ish triangles
    const AcceleratedMesh accel(mesh);
    const auto& nodes = accel.nodes();
    for (const BvhNode& node : nodes) {
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const auto& f = mesh.faces[accel.primitive_order()[i]];
                for (int k = 0; k < 3; ++k) {
                    const Eigen::Vector3d& v = mesh.vertices[f[k]];
                    for (int a = 0; a < 3; ++a) {
                        EXPECT_GE(v[a], node.lo[a]);
                        EXPECT_LE(v[a], node.hi[a]);
                    }
                }
            }
            EXPECT_LE(node.count, static_cast<std::uint32_t>(AcceleratedMesh::kMaxLeafSize));
        } else {
            for (std::int32_t child : {node.left, node.right}) {
                ASSERT_GE(child, 0);
                for (int a = 0; a < 3; ++a) {
                    EXPECT_LE(node.lo[a], nodes[child].lo[a]);
                    EXPECT_GE(node.hi[a], nodes[child].hi[a]);
                }
            }
        }
    }
}

// Every triangle must land in exactly one leaf.
TEST(Bvh, PrimitivePartitionCoversAllFacesOnce) {
    const TriangleMesh mesh = ts::make_triangle_soup(500, 77);
    const AcceleratedMesh accel(mesh);
    std::vector<int> seen(mesh.face_count(), 0);
    std::size_t leaf_total = 0;
    for (const BvhNode& node : accel.nodes()) {
        if (node.count > 0) {
            leaf_total += node.count;
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                seen[accel.primitive_order()[i]]++;
            }
        }
    }
    EXPECT_EQ(leaf_total, mesh.face_count());
    for (int s : seen) {
        EXPECT_EQ(s, 1);
    }
}

TEST(Bvh, MatchesExhaustiveOracleOnRandomScene) {
    const TriangleMesh mesh = ts::make_triangle_soup(10000, 31337);
    const AcceleratedMesh accel(mesh);
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> in_cube(0.1, 0.9);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> cosine(-1.0, 1.0);

    int hits = 0;
    for (int i = 0; i < 1000; ++i) {
        const double phi = angle(rng);
        const double c = cosine(rng);
        const double s = std::sqrt(1.0 - c * c);
        const Eigen::Vector3d origin =
            Eigen::Vector3d(0.5, 0.5, 0.5) + 3.0 * Eigen::Vector3d(s * std::cos(phi),
                                                                   s * std::sin(phi), c);
        const Eigen::Vector3d target(in_cube(rng), in_cube(rng), in_cube(rng));
        const Eigen::Vector3d dir = (target - origin).normalized();

        const auto fast = accel.intersect({origin, dir});
        const auto slow = ts::oracle_nearest_hit(mesh, origin, dir);
        ASSERT_EQ(fast.has_value(), slow.has_value()) << "ray " << i;
        if (fast) {
            EXPECT_EQ(fast->face_index, slow->face) << "ray " << i;
            EXPECT_LE(std::abs(fast->t - slow->t), 1e-9 * slow->t) << "ray " << i;
            ++hits;
        }
    }
    EXPECT_GT(hits, 500);  // the scene is dense enough that most rays hit
}

TEST(Occlusion, WallBlocksSegment) {
    TriangleMesh mesh = ts::make_quad(-2, 2, -2, 2, 2.0);  // wall at z=2
    const AcceleratedMesh accel(mesh);
    const Eigen::Vector3d camera(0, 0, 0);
    EXPECT_TRUE(accel.is_occluded(camera, {0.3, 0.1, 4.0}, 1e-6));
    EXPECT_FALSE(accel.is_occluded(camera, {0.3, 0.1, 1.5}, 1e-6));   // in front of the wall
    EXPECT_FALSE(accel.is_occluded(camera, {5.0, 5.0, 4.0}, 1e-6));   // passes beside the wall
    EXPECT_THROW(accel.is_occluded(camera, camera, 1e-6), ValidationError);
    EXPECT_THROW(accel.is_occluded(camera, {0, 0, 1}, 0.0), ValidationError);
}

TEST(Occlusion, MeshVertexDoesNotSelfOccludeWithSceneEpsilon) {
    const TriangleMesh mesh = ts::make_cube({0, 0, 4}, 1.0);
    const AcceleratedMesh accel(mesh);
    const double epsilon = accel.default_occlusion_epsilon();
    EXPECT_NEAR(epsilon, 1e-4 * 2.0 * std::sqrt(3.0), 1e-12);

    const Eigen::Vector3d camera(0, 0, 0);
    // Front-face corners are directly visible; their incident faces must not
    // count as occluders.
    const std::vector<Eigen::Vector3d> corners = {
        {-1, -1, 3}, {1, -1, 3}, {1, 1, 3}, {-1, 1, 3}};
    for (const Eigen::Vector3d& corner : corners) {
        EXPECT_FALSE(accel.is_occluded(camera, corner, epsilon));
    }
    // A back-face corner interior to the silhouette is blocked by the front.
    EXPECT_TRUE(accel.is_occluded(camera, {0.0, 0.0, 5.0}, epsilon));
}
