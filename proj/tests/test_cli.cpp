#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <string>

#include "stereogen/dataset.hpp"
#include "stereogen/mesh.hpp"
#include "stereogen/pfm.hpp"
#include "test_support.hpp"

namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the stereogen binary, from argv[1]

int run_cli(const std::string& args, const fs::path& log) {
    const std::string command = "\"" + g_cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

struct Fixture {
    ts::TempDir dir{"cli"};
    fs::path colmap;
    fs::path colmap_bad;
    fs::path mesh;

    Fixture() {
        colmap = dir / "sparse";
        colmap_bad = dir / "sparse_bad";
        mesh = dir / "scene.ply";

        std::vector<stereogen::CameraIntrinsics> cameras = {ts::make_intrinsics(64, 48, 48.0)};
        std::vector<stereogen::PosedImage> images;
        const Eigen::Vector3d target(0, 0, 4);
        const std::vector<Eigen::Vector3d> eyes = {
            {0.0, 0.0, 0.0}, {0.8, 0.2, 0.3}, {-0.9, 0.1, 0.2},
            {0.3, 0.8, 0.1}, {-0.2, -0.7, 0.4}, {1.5, 0.5, 6.5},
        };
        for (std::size_t i = 0; i < eyes.size(); ++i) {
            images.push_back(ts::look_at(eyes[i], target, static_cast<int>(i) + 1, 1));
        }
        ts::write_colmap_binary(colmap, cameras, images);

        // A variant with two off-center principal points.
        auto bad_cameras = cameras;
        bad_cameras[0].camera_id = 1;
        stereogen::CameraIntrinsics off1 = ts::make_intrinsics(64, 48, 48.0, 2);
        off1.cx = 40.0;
        stereogen::CameraIntrinsics off2 = ts::make_intrinsics(64, 48, 48.0, 3);
        off2.cy = 30.0;
        bad_cameras.push_back(off1);
        bad_cameras.push_back(off2);
        auto bad_images = images;
        bad_images[1].camera_id = 2;
        bad_images[2].camera_id = 3;
        ts::write_colmap_binary(colmap_bad, bad_cameras, bad_images);

        stereogen::write_ply(mesh, ts::make_cube({0, 0, 4}, 1.0));
    }
};

}  // namespace

TEST(Cli, ValidateCleanModelExitsZero) {
    Fixture fx;
    EXPECT_EQ(run_cli("validate --colmap " + fx.colmap.string() + " --strict",
                      fx.dir / "log.txt"),
              0);
}

TEST(Cli, ValidateStrictFlagsOffCenterModel) {
    Fixture fx;
    const fs::path report = fx.dir / "report.json";
    EXPECT_EQ(run_cli("validate --colmap " + fx.colmap_bad.string() + " --strict --report " +
                          report.string(),
                      fx.dir / "log.txt"),
              1);
    // Without --strict the same model passes with warnings.
    EXPECT_EQ(run_cli("validate --colmap " + fx.colmap_bad.string(), fx.dir / "log2.txt"), 0);

    std::ifstream in(report);
    nlohmann::json j;
    in >> j;
    ASSERT_EQ(j["warnings"].size(), 2u);
    std::set<int> flagged;
    for (const auto& w : j["warnings"]) {
        flagged.insert(w["camera_id"].get<int>());
    }
    EXPECT_EQ(flagged, (std::set<int>{2, 3}));
}

TEST(Cli, UsageErrorsExitTwo) {
    Fixture fx;
    EXPECT_EQ(run_cli("validate", fx.dir / "log.txt"), 2);  // missing required option
    EXPECT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --unknown-flag 1 --out x",
                      fx.dir / "log.txt"),
              2);
    EXPECT_EQ(run_cli("--help", fx.dir / "log.txt"), 0);
    EXPECT_EQ(run_cli("validate --colmap /nonexistent/dir", fx.dir / "log.txt"), 3);
}

TEST(Cli, ObservabilityOutputsAreDeterministic) {
    Fixture fx;
    const std::string base = "observability --colmap " + fx.colmap.string() + " --mesh " +
                             fx.mesh.string() + " --top-k 5";
    const fs::path heat1 = fx.dir / "h1.ply", heat2 = fx.dir / "h2.ply";
    const fs::path csv1 = fx.dir / "r1.csv", csv2 = fx.dir / "r2.csv";
    const fs::path sel = fx.dir / "sel.json";
    ASSERT_EQ(run_cli(base + " --heatmap " + heat1.string() + " --ranking " + csv1.string() +
                          " --selection " + sel.string(),
                      fx.dir / "log.txt"),
              0);
    ASSERT_EQ(run_cli(base + " --heatmap " + heat2.string() + " --ranking " + csv2.string() +
                          " --selection " + sel.string() + " --jobs 3",
                      fx.dir / "log.txt"),
              0);
    EXPECT_EQ(ts::read_file_bytes(heat1), ts::read_file_bytes(heat2));
    EXPECT_EQ(ts::read_file_bytes(csv1), ts::read_file_bytes(csv2));

    // CSV: header plus one row per image.
    std::ifstream in(csv1);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "image_id,name,score");
    int rows = 0;
    while (std::getline(in, line)) {
        rows += !line.empty();
    }
    EXPECT_EQ(rows, 6);

    std::ifstream sel_in(sel);
    nlohmann::json ids;
    sel_in >> ids;
    EXPECT_LE(ids.size(), 5u);
    EXPECT_GE(ids.size(), 1u);
}

TEST(Cli, SynthFiveCamerasThreeBaselines) {
    Fixture fx;
    const fs::path out = fx.dir / "dataset";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --images 1,2,3,4,5 --baselines 0.08,0.16,0.24 --out " + out.string(),
                      fx.dir / "log.txt"),
              0);
    const auto manifest = stereogen::read_manifest(out / "manifest.json");
    EXPECT_EQ(manifest.entries.size(), 15u);
    for (const auto& entry : manifest.entries) {
        EXPECT_TRUE(fs::exists(out / entry.disparity));
    }
}

TEST(Cli, SynthTopKSelectsByObservability) {
    Fixture fx;
    const fs::path out = fx.dir / "dataset_topk";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --top-k 2 --baselines 0.1 --out " + out.string(),
                      fx.dir / "log.txt"),
              0);
    const auto manifest = stereogen::read_manifest(out / "manifest.json");
    EXPECT_EQ(manifest.entries.size(), 2u);

    // Without --images the default is the five best-observed cameras.
    const fs::path out5 = fx.dir / "dataset_top5";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --baselines 0.1 --out " + out5.string(),
                      fx.dir / "log.txt"),
              0);
    EXPECT_EQ(stereogen::read_manifest(out5 / "manifest.json").entries.size(), 5u);
}

TEST(Cli, EvalPerfectPredictionScoresZero) {
    Fixture fx;
    const fs::path out = fx.dir / "dataset";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --images 1,2 --baselines 0.1 --out " + out.string(),
                      fx.dir / "log.txt"),
              0);
    const auto manifest = stereogen::read_manifest(out / "manifest.json");

    const fs::path pred = fx.dir / "pred";
    fs::create_directories(pred);
    for (const auto& entry : manifest.entries) {
        fs::copy_file(out / entry.disparity, pred / fs::path(entry.disparity).filename());
    }
    const fs::path report = fx.dir / "eval.json";
    ASSERT_EQ(run_cli("eval --manifest " + (out / "manifest.json").string() + " --pred " +
                          pred.string() + " --family middlebury --json " + report.string(),
                      fx.dir / "log.txt"),
              0);
    std::ifstream in(report);
    nlohmann::json j;
    in >> j;
    EXPECT_DOUBLE_EQ(j["datasets"][0]["all_pct"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(j["datasets"][0]["tau"].get<double>(), 2.0);

    // A uniformly shifted prediction fails a strict gate.
    const fs::path pred_bad = fx.dir / "pred_bad";
    fs::create_directories(pred_bad);
    for (const auto& entry : manifest.entries) {
        stereogen::DisparityMap d = stereogen::read_pfm(out / entry.disparity);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.values[i] > 0.0) {
                d.values[i] += 10.0;
            } else {
                d.valid[i] = 0;
            }
        }
        stereogen::write_pfm(pred_bad / fs::path(entry.disparity).filename(), d);
    }
    EXPECT_EQ(run_cli("eval --manifest " + (out / "manifest.json").string() + " --pred " +
                          pred_bad.string() + " --family middlebury --strict --fail-above 50",
                      fx.dir / "log.txt"),
              1);
}

TEST(Cli, RenderWritesDepthColorAlpha) {
    Fixture fx;
    // Mesh source: depth only.
    const fs::path depth = fx.dir / "depth.pfm";
    ASSERT_EQ(run_cli("render --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --image-id 1 --depth " + depth.string(),
                      fx.dir / "log.txt"),
              0);
    const stereogen::DepthMap loaded = stereogen::read_pfm(depth);
    EXPECT_EQ(loaded.width, 64);
    EXPECT_EQ(loaded.height, 48);
    EXPECT_GT(loaded.at(32, 24), 2.0);  // cube front face ~3 units out

    // Splat source: color and alpha too.
    stereogen::SplatScene scene;
    ts::add_splat_wall(scene, -2, 2, -2, 2, 4.0, 0.2, 0.12, 0.9, {0.2, 0.8, 0.4});
    // Raw values that activate to the wall above: inverse activations.
    {
        std::ofstream out(fx.dir / "splats.ply", std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.splats.size()
            << "\n";
        for (const char* p : {"x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                              "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"}) {
            out << "property float " << p << "\n";
        }
        out << "end_header\n";
        for (const auto& s : scene.splats) {
            const float raw[14] = {
                static_cast<float>(s.mean.x()), static_cast<float>(s.mean.y()),
                static_cast<float>(s.mean.z()),
                static_cast<float>(std::log(s.opacity / (1.0 - s.opacity))),
                static_cast<float>(std::log(s.scale.x())), static_cast<float>(std::log(s.scale.y())),
                static_cast<float>(std::log(s.scale.z())), 1.0f, 0.0f, 0.0f, 0.0f,
                static_cast<float>((s.color.x() - 0.5) / stereogen::kShC0),
                static_cast<float>((s.color.y() - 0.5) / stereogen::kShC0),
                static_cast<float>((s.color.z() - 0.5) / stereogen::kShC0)};
            out.write(reinterpret_cast<const char*>(raw), sizeof(raw));
        }
    }
    const fs::path color = fx.dir / "color.png";
    const fs::path alpha = fx.dir / "alpha.pfm";
    ASSERT_EQ(run_cli("render --colmap " + fx.colmap.string() + " --splats " +
                          (fx.dir / "splats.ply").string() + " --image-id 1 --color " +
                          color.string() + " --alpha " + alpha.string(),
                      fx.dir / "log.txt"),
              0);
    EXPECT_TRUE(fs::exists(color));
    const stereogen::AlphaMap alpha_map = stereogen::read_pfm(alpha);
    EXPECT_GT(alpha_map.at(32, 24), 0.5);

    // No render source at all is a usage error.
    EXPECT_EQ(run_cli("render --colmap " + fx.colmap.string() + " --image-id 1",
                      fx.dir / "log.txt"),
              2);
}

TEST(Cli, EvalDirectoryConventionMode) {
    Fixture fx;
    const fs::path out = fx.dir / "dataset_conv";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --images 1,2 --baselines 0.12 --out " + out.string(),
                      fx.dir / "log.txt"),
              0);
    // The dataset directory already follows the disp/ + noc/ convention.
    const fs::path pred = fx.dir / "pred_conv";
    fs::create_directories(pred);
    for (const auto& e : fs::directory_iterator(out / "disp")) {
        fs::copy_file(e.path(), pred / e.path().filename());
    }
    const fs::path report = fx.dir / "conv.json";
    ASSERT_EQ(run_cli("eval --gt-dir " + out.string() + " --pred " + pred.string() +
                          " --tau 1.5 --json " + report.string(),
                      fx.dir / "log.txt"),
              0);
    std::ifstream in(report);
    nlohmann::json j;
    in >> j;
    EXPECT_EQ(j["datasets"][0]["pairs"].size(), 2u);
    EXPECT_DOUBLE_EQ(j["datasets"][0]["all_pct"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(j["datasets"][0]["tau"].get<double>(), 1.5);
}

TEST(Cli, HistogramReadsSynthOutput) {
    Fixture fx;
    const fs::path out = fx.dir / "dataset_h";
    ASSERT_EQ(run_cli("synth --colmap " + fx.colmap.string() + " --mesh " + fx.mesh.string() +
                          " --images 1 --baselines 0.2 --out " + out.string(),
                      fx.dir / "log.txt"),
              0);
    const auto manifest = stereogen::read_manifest(out / "manifest.json");
    const fs::path bins = fx.dir / "bins.json";
    ASSERT_EQ(run_cli("histogram --input " + (out / manifest.entries[0].disparity).string() +
                          " --bin-width 0.5 --json " + bins.string(),
                      fx.dir / "log.txt"),
              0);
    std::ifstream in(bins);
    nlohmann::json j;
    in >> j;
    EXPECT_GE(j.size(), 1u);
}

TEST(Cli, ConfigFileSuppliesDefaults) {
    Fixture fx;
    const fs::path config = fx.dir / "scene.ini";
    std::ofstream(config) << "[validate]\ncolmap=\"" << fx.colmap.string() << "\"\n";
    EXPECT_EQ(run_cli("--config " + config.string() + " validate", fx.dir / "log.txt"), 0);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    if (argc > 1) {
        g_cli = argv[1];
    } else if (const char* env = std::getenv("STEREOGEN_BIN")) {
        g_cli = env;
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "missing stereogen binary path (argv[1] or STEREOGEN_BIN)\n");
        return 1;
    }
    return RUN_ALL_TESTS();
}
