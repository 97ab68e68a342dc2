#include <gtest/gtest.h>

#include <json.hpp>

#include <random>

#include "stereogen/eval.hpp"
#include "test_support.hpp"

using namespace stereogen;
namespace ts = testsupport;

namespace {

DisparityMap map_of(const std::vector<double>& values, int width = 0) {
    const int w = width > 0 ? width : static_cast<int>(values.size());
    const int h = static_cast<int>(values.size()) / w;
    DisparityMap map(w, h);
    for (std::size_t i = 0; i < values.size(); ++i) {
        map.values[i] = values[i];
        map.valid[i] = 1;
    }
    return map;
}

}  // namespace

TEST(BadTau, DefaultsPerDatasetFamily) {
    EXPECT_DOUBLE_EQ(default_tau("ETH3D"), 1.0);
    EXPECT_DOUBLE_EQ(default_tau("Middlebury"), 2.0);
    EXPECT_DOUBLE_EQ(default_tau("kitti"), 3.0);
    EXPECT_THROW(default_tau("sceneflow"), ValidationError);
    EXPECT_EQ(eval_config_for_family("eth3d").tau, 1.0);
}

TEST(BadTau, IdenticalMapsScoreZero) {
    const DisparityMap gt = map_of({1, 2, 3, 4, 5});
    Mask all(gt.width, gt.height, true);
    EXPECT_DOUBLE_EQ(bad_tau(gt, gt, all, 2.0), 0.0);
}

TEST(BadTau, StrictInequalityAtThreshold) {
    // Errors 0,1,2,3,4 px with tau = 2: only 3 and 4 exceed strictly.
    const DisparityMap gt = map_of({10, 10, 10, 10, 10});
    const DisparityMap pred = map_of({10, 11, 12, 13, 14});
    Mask all(gt.width, gt.height, true);
    EXPECT_DOUBLE_EQ(bad_tau(pred, gt, all, 2.0), 40.0);
}

TEST(BadTau, PredInvalidCountsAsError) {
    const DisparityMap gt = map_of({5, 5, 5, 5});
    DisparityMap pred = map_of({5, 5, 5, 5});
    pred.invalidate(1, 0);
    Mask all(gt.width, gt.height, true);
    EXPECT_DOUBLE_EQ(bad_tau(pred, gt, all, 2.0), 25.0);
}

TEST(BadTau, EmptyEvaluationSetRejected) {
    DisparityMap gt(4, 1);  // nothing valid
    const DisparityMap pred = map_of({1, 2, 3, 4});
    Mask all(gt.width, gt.height, true);
    EXPECT_THROW(bad_tau(pred, gt, all, 1.0), ValidationError);
    DisparityMap other(2, 1);
    EXPECT_THROW(bad_tau(other, map_of({1, 2, 3}), all, 1.0), ValidationError);
}

TEST(BadTau, MatchesNaiveCountingOracle) {
    std::mt19937 rng(555);
    std::uniform_real_distribution<double> d(0.0, 30.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    DisparityMap gt(32, 32), pred(32, 32);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (coin(rng) < 0.9) {
            gt.values[i] = d(rng);
            gt.valid[i] = 1;
        }
        if (coin(rng) < 0.95) {
            pred.values[i] = d(rng);
            pred.valid[i] = 1;
        }
    }
    Mask mask(32, 32);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        mask.data[i] = coin(rng) < 0.8;
    }
    const double tau = 3.0;

    long evaluated = 0, bad = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.valid[i] == 0 || mask.data[i] == 0) {
            continue;
        }
        ++evaluated;
        const bool wrong = pred.valid[i] == 0 || std::abs(pred.values[i] - gt.values[i]) > tau;
        bad += wrong ? 1 : 0;
    }
    EXPECT_DOUBLE_EQ(bad_tau(pred, gt, mask, tau), 100.0 * bad / evaluated);
}

TEST(BadTau, AntiMonotoneInTau) {
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> d(0.0, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        DisparityMap gt(16, 16), pred(16, 16);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            gt.values[i] = d(rng);
            gt.valid[i] = 1;
            pred.values[i] = d(rng);
            pred.valid[i] = 1;
        }
        Mask all(16, 16, true);
        double previous = 100.0;
        for (double tau : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double pct = bad_tau(pred, gt, all, tau);
            EXPECT_LE(pct, previous + 1e-12);
            previous = pct;
        }
    }
}

TEST(BadTau, PermutationInvariant) {
    const std::vector<double> gt_vals = {4, 8, 15, 16, 23, 42};
    const std::vector<double> pred_vals = {4, 9, 11, 16, 29, 42};
    std::vector<std::size_t> order = {3, 0, 5, 1, 4, 2};
    std::vector<double> gt_shuffled, pred_shuffled;
    for (std::size_t i : order) {
        gt_shuffled.push_back(gt_vals[i]);
        pred_shuffled.push_back(pred_vals[i]);
    }
    Mask all(6, 1, true);
    EXPECT_DOUBLE_EQ(bad_tau(map_of(pred_vals), map_of(gt_vals), all, 2.0),
                     bad_tau(map_of(pred_shuffled), map_of(gt_shuffled), all, 2.0));
}

TEST(BadTau, BinaryErrorMapIsExactFraction) {
    const double tau = 2.0;
    DisparityMap gt(8, 1), pred(8, 1);
    for (int x = 0; x < 8; ++x) {
        gt.set(x, 0, 10.0);
        pred.set(x, 0, x < 3 ? 10.0 + 2.0 * tau : 10.0);  // 3 of 8 err by 2*tau
    }
    Mask all(8, 1, true);
    EXPECT_DOUBLE_EQ(bad_tau(pred, gt, all, tau), 100.0 * 3.0 / 8.0);
}

TEST(EvaluatePair, NocSplitsFollowMask) {
    // Errors confined to the occluded region: Noc is clean, All is not.
    DisparityMap gt(10, 1), pred(10, 1);
    Mask noc(10, 1);
    for (int x = 0; x < 10; ++x) {
        gt.set(x, 0, 20.0);
        const bool occluded = x < 4;
        pred.set(x, 0, occluded ? 30.0 : 20.0);
        noc.set(x, 0, !occluded);
    }
    const PairResult result = evaluate_pair(pred, gt, noc, EvalConfig{2.0, "toy"});
    EXPECT_DOUBLE_EQ(result.all_pct, 40.0);
    EXPECT_DOUBLE_EQ(result.noc_pct, 0.0);
    EXPECT_EQ(result.evaluated_all, 10);
    EXPECT_EQ(result.evaluated_noc, 6);

    Mask all_true(10, 1, true);
    const PairResult same = evaluate_pair(pred, gt, all_true, EvalConfig{2.0, "toy"});
    EXPECT_DOUBLE_EQ(same.all_pct, same.noc_pct);
}

TEST(Aggregate, WeightingRules) {
    // Identical pairs agree under both weightings.
    const std::vector<PairResult> same = {{10.0, 5.0, 100, 50}, {10.0, 5.0, 100, 50}};
    EXPECT_DOUBLE_EQ(aggregate(same, Weighting::kPair).first, 10.0);
    EXPECT_DOUBLE_EQ(aggregate(same, Weighting::kPixel).first, 10.0);

    // Equal pixel counts: 0% and 100% average to 50% either way.
    const std::vector<PairResult> split = {{0.0, 0.0, 500, 500}, {100.0, 100.0, 500, 500}};
    EXPECT_DOUBLE_EQ(aggregate(split, Weighting::kPair).first, 50.0);
    EXPECT_DOUBLE_EQ(aggregate(split, Weighting::kPixel).first, 50.0);

    // Unequal pixel counts split the weightings: 10% over 100 px + 0% over
    // 900 px -> 1% pixel-weighted, 5% pair-weighted.
    const std::vector<PairResult> skew = {{10.0, 10.0, 100, 100}, {0.0, 0.0, 900, 900}};
    EXPECT_DOUBLE_EQ(aggregate(skew, Weighting::kPixel).first, 1.0);
    EXPECT_DOUBLE_EQ(aggregate(skew, Weighting::kPair).first, 5.0);

    EXPECT_THROW(aggregate({}, Weighting::kPair), ValidationError);
}

namespace {

EvalReport report_with(const std::vector<std::pair<std::string, double>>& dataset_scores) {
    EvalReport report;
    for (const auto& [name, pct] : dataset_scores) {
        DatasetReport d;
        d.name = name;
        d.pairs.push_back({pct, pct, 1000, 800});
        report.datasets.push_back(std::move(d));
    }
    return report;
}

}  // namespace

TEST(SelectBestCheckpoint, SingleDominanceAndTies) {
    std::map<std::string, EvalReport> reports;
    reports["ckpt_010"] = report_with({{"kitti12", 6.0}, {"midd_a", 14.0}});
    EXPECT_EQ(select_best_checkpoint(reports), "ckpt_010");

    reports["ckpt_020"] = report_with({{"kitti12", 5.0}, {"midd_a", 12.0}});  // dominates
    EXPECT_EQ(select_best_checkpoint(reports), "ckpt_020");

    reports["ckpt_030"] = report_with({{"kitti12", 4.0}, {"midd_a", 13.0}});  // same mean as 020
    EXPECT_EQ(select_best_checkpoint(reports), "ckpt_020");  // earliest id wins the tie

    std::map<std::string, EvalReport> inconsistent = reports;
    inconsistent["ckpt_040"] = report_with({{"kitti12", 1.0}});
    EXPECT_THROW(select_best_checkpoint(inconsistent), ValidationError);
}

TEST(SelectBestCheckpoint, MatchesHandComputedArgmin) {
    // Hand-tabulated: means are 8.0, 7.9, 9.1.
    std::map<std::string, EvalReport> reports;
    reports["a"] = report_with({{"k", 6.0}, {"m", 10.0}, {"e", 8.0}});
    reports["b"] = report_with({{"k", 9.5}, {"m", 7.2}, {"e", 7.0}});
    reports["c"] = report_with({{"k", 12.0}, {"m", 8.3}, {"e", 7.0}});
    EXPECT_NEAR(reports["b"].mean_all_pct(), 7.9, 1e-12);
    EXPECT_EQ(select_best_checkpoint(reports), "b");
}

TEST(SelectBestCheckpoint, InvariantUnderAffineRescaling) {
    std::map<std::string, EvalReport> reports;
    reports["a"] = report_with({{"k", 6.0}, {"m", 10.0}});
    reports["b"] = report_with({{"k", 9.5}, {"m", 7.2}});
    const std::string before = select_best_checkpoint(reports);
    for (auto& [id, report] : reports) {
        for (auto& d : report.datasets) {
            for (auto& p : d.pairs) {
                p.all_pct = 0.5 * p.all_pct + 3.0;
            }
        }
    }
    EXPECT_EQ(select_best_checkpoint(reports), before);
}

TEST(RenderReport, TwoDecimalsAndHeaderOnlyWhenEmpty) {
    EvalReport report;
    DatasetReport d;
    d.name = "kitti";
    d.tau = 3.0;
    d.pairs.push_back({5.52, 5.31, 1000, 900});
    report.datasets.push_back(d);
    const std::string text = render_report(report);
    EXPECT_NE(text.find("5.52"), std::string::npos);
    EXPECT_NE(text.find("5.31"), std::string::npos);

    const std::string empty = render_report(EvalReport{});
    EXPECT_NE(empty.find("dataset"), std::string::npos);
    EXPECT_EQ(empty.find("kitti"), std::string::npos);
    // Header plus rule line only.
    EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 2);
}

TEST(ReportJson, RoundTripsNumbersExactly) {
    EvalReport report;
    DatasetReport d;
    d.name = "middlebury";
    d.tau = 2.0;
    d.pairs.push_back({15.72, 12.0, 123456, 98765});
    d.pairs.push_back({9.67, 6.42, 222, 111});
    report.datasets.push_back(d);

    const nlohmann::json j = nlohmann::json::parse(report_to_json(report).dump());
    EXPECT_EQ(j["datasets"][0]["name"], "middlebury");
    EXPECT_DOUBLE_EQ(j["datasets"][0]["pairs"][0]["all_pct"].get<double>(), 15.72);
    EXPECT_DOUBLE_EQ(j["datasets"][0]["all_pct"].get<double>(), d.all_pct());
    EXPECT_EQ(j["datasets"][0]["pairs"][1]["evaluated_noc"].get<std::int64_t>(), 111);
}

TEST(LoadDisparity, DispatchesOnExtension) {
    ts::TempDir dir("load_disp");
    DisparityMap disp = map_of({1.5, 2.5, 0.0, 3.5}, 2);
    disp.valid[2] = 1;  // zero disparity: must come back invalid from both formats
    write_pfm(dir / "d.pfm", disp);
    write_disparity_png16(dir / "d.png", disp);

    const DisparityMap from_pfm = load_disparity(dir / "d.pfm");
    const DisparityMap from_png = load_disparity(dir / "d.png");
    EXPECT_FALSE(from_pfm.is_valid(0, 1));
    EXPECT_FALSE(from_png.is_valid(0, 1));
    EXPECT_NEAR(from_pfm.at(0, 0), 1.5, 1e-7);
    EXPECT_NEAR(from_png.at(0, 0), 1.5, 1.0 / 256.0);

    EXPECT_THROW(load_disparity(dir / "d.exr"), ParseError);
}
