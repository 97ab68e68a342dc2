#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stereogen/common.hpp"
#include "stereogen/image.hpp"
#include "stereogen/pfm.hpp"
#include "stereogen/png_io.hpp"

namespace stereogen {

struct EvalConfig {
    double tau = 2.0;  // bad-pixel threshold, pixels
    std::string name;
};

/// Conventional thresholds: ETH3D 1 px, Middlebury 2 px, KITTI 3 px.
inline double default_tau(std::string_view dataset_family) {
    std::string lower(dataset_family);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "eth3d") return 1.0;
    if (lower == "middlebury") return 2.0;
    if (lower == "kitti") return 3.0;
    throw ValidationError("unknown dataset family '" + std::string(dataset_family) + "'");
}

inline EvalConfig eval_config_for_family(std::string_view dataset_family) {
    return EvalConfig{default_tau(dataset_family), std::string(dataset_family)};
}

struct PairResult {
    double all_pct = 0.0;
    double noc_pct = 0.0;
    std::int64_t evaluated_all = 0;
    std::int64_t evaluated_noc = 0;
};

enum class Weighting { kPixel, kPair };

/// Percentage of evaluated pixels (gt-valid and masked-in) whose absolute
/// disparity error strictly exceeds tau. Pixels the prediction leaves
/// invalid count as errors; excluding them would reward sparse predictors.
inline double bad_tau(const DisparityMap& pred, const DisparityMap& gt, const Mask& mask,
                      double tau) {
    if (pred.width != gt.width || pred.height != gt.height || mask.width != gt.width ||
        mask.height != gt.height) {
        throw ValidationError("bad_tau: shapes differ");
    }
    std::int64_t evaluated = 0;
    std::int64_t bad = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt.valid[i] || !mask.data[i]) {
            continue;
        }
        ++evaluated;
        if (!pred.valid[i] || std::abs(pred.values[i] - gt.values[i]) > tau) {
            ++bad;
        }
    }
    if (evaluated == 0) {
        throw ValidationError("bad_tau: empty evaluation set");
    }
    return 100.0 * static_cast<double>(bad) / static_cast<double>(evaluated);
}

/// All = bad-tau over every gt pixel; Noc = bad-tau restricted to the
/// non-occluded mask.
inline PairResult evaluate_pair(const DisparityMap& pred, const DisparityMap& gt,
                                const Mask& noc_mask, const EvalConfig& config) {
    PairResult result;
    Mask all(gt.width, gt.height, true);
    result.all_pct = bad_tau(pred, gt, all, config.tau);
    result.noc_pct = bad_tau(pred, gt, noc_mask, config.tau);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.valid[i]) {
            ++result.evaluated_all;
            if (noc_mask.data[i]) {
                ++result.evaluated_noc;
            }
        }
    }
    return result;
}

/// Pixel weighting averages over all evaluated pixels; pair weighting takes
/// the unweighted mean of per-pair percentages (the usual Middlebury-style
/// report). Returns (all_pct, noc_pct).
inline std::pair<double, double> aggregate(const std::vector<PairResult>& results,
                                           Weighting weighting = Weighting::kPair) {
    if (results.empty()) {
        throw ValidationError("aggregate: no results");
    }
    double all = 0.0, noc = 0.0;
    if (weighting == Weighting::kPair) {
        for (const PairResult& r : results) {
            all += r.all_pct;
            noc += r.noc_pct;
        }
        all /= static_cast<double>(results.size());
        noc /= static_cast<double>(results.size());
    } else {
        double all_pixels = 0.0, noc_pixels = 0.0;
        for (const PairResult& r : results) {
            all += r.all_pct * static_cast<double>(r.evaluated_all);
            noc += r.noc_pct * static_cast<double>(r.evaluated_noc);
            all_pixels += static_cast<double>(r.evaluated_all);
            noc_pixels += static_cast<double>(r.evaluated_noc);
        }
        all = all_pixels > 0.0 ? all / all_pixels : 0.0;
        noc = noc_pixels > 0.0 ? noc / noc_pixels : 0.0;
    }
    return {all, noc};
}

struct DatasetReport {
    std::string name;
    double tau = 2.0;
    Weighting weighting = Weighting::kPair;
    std::vector<PairResult> pairs;

    std::pair<double, double> aggregates() const { return aggregate(pairs, weighting); }
    double all_pct() const { return aggregates().first; }
    double noc_pct() const { return aggregates().second; }
};

struct EvalReport {
    std::vector<DatasetReport> datasets;

    /// Unweighted mean of per-dataset All percentages.
    double mean_all_pct() const {
        if (datasets.empty()) {
            throw ValidationError("EvalReport: no datasets");
        }
        double sum = 0.0;
        for (const DatasetReport& d : datasets) {
            sum += d.all_pct();
        }
        return sum / static_cast<double>(datasets.size());
    }
};

/// Picks the checkpoint minimizing the mean per-dataset All percentage over
/// a common validation suite; ties go to the earliest checkpoint id.
inline std::string select_best_checkpoint(const std::map<std::string, EvalReport>& reports) {
    if (reports.empty()) {
        throw ValidationError("select_best_checkpoint: no reports");
    }
    std::vector<std::string> suite;
    for (const DatasetReport& d : reports.begin()->second.datasets) {
        suite.push_back(d.name);
    }
    std::string best_id;
    double best_score = 0.0;
    for (const auto& [id, report] : reports) {
        std::vector<std::string> names;
        for (const DatasetReport& d : report.datasets) {
            names.push_back(d.name);
        }
        if (names != suite) {
            throw ValidationError("select_best_checkpoint: checkpoint '" + id +
                                  "' covers a different validation suite");
        }
        const double score = report.mean_all_pct();
        if (best_id.empty() || score < best_score) {
            best_id = id;
            best_score = score;
        }
    }
    return best_id;
}

/// Fixed-width text table, two decimals, All/Noc per dataset.
inline std::string render_report(const EvalReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %5s %6s %8s %8s\n", "dataset", "tau", "pairs", "All",
                  "Noc");
    out += line;
    out += std::string(46, '-') + "\n";
    for (const DatasetReport& d : report.datasets) {
        const auto [all, noc] = d.aggregates();
        std::snprintf(line, sizeof(line), "%-16s %5.1f %6zu %8.2f %8.2f\n", d.name.c_str(), d.tau,
                      d.pairs.size(), all, noc);
        out += line;
    }
    if (report.datasets.size() > 1) {
        double all_sum = 0.0, noc_sum = 0.0;
        for (const DatasetReport& d : report.datasets) {
            const auto [all, noc] = d.aggregates();
            all_sum += all;
            noc_sum += noc;
        }
        const auto n = static_cast<double>(report.datasets.size());
        std::snprintf(line, sizeof(line), "%-16s %5s %6s %8.2f %8.2f\n", "mean", "", "",
                      all_sum / n, noc_sum / n);
        out += line;
    }
    return out;
}

/// Machine-readable twin of render_report.
inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json datasets = nlohmann::json::array();
    for (const DatasetReport& d : report.datasets) {
        const auto [all, noc] = d.aggregates();
        nlohmann::json pairs = nlohmann::json::array();
        for (const PairResult& p : d.pairs) {
            pairs.push_back({{"all_pct", p.all_pct},
                             {"noc_pct", p.noc_pct},
                             {"evaluated_all", p.evaluated_all},
                             {"evaluated_noc", p.evaluated_noc}});
        }
        datasets.push_back({{"name", d.name},
                            {"tau", d.tau},
                            {"weighting", d.weighting == Weighting::kPair ? "pair" : "pixel"},
                            {"all_pct", all},
                            {"noc_pct", noc},
                            {"pairs", pairs}});
    }
    return nlohmann::json{{"datasets", datasets}};
}

/// Disparity ground truth: PFM or 16-bit PNG (d * 256, 0 invalid), chosen by
/// extension. PFM pixels that are non-finite or <= 0 are invalid.
inline DisparityMap load_disparity(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".pfm") {
        DisparityMap disp = read_pfm(path);
        for (std::size_t i = 0; i < disp.size(); ++i) {
            if (!std::isfinite(disp.values[i]) || disp.values[i] <= 0.0) {
                disp.values[i] = 0.0;
                disp.valid[i] = 0;
            }
        }
        return disp;
    }
    if (ext == ".png") {
        return read_disparity_png16(path);
    }
    throw ParseError("unsupported disparity format '" + ext + "' for " + path.string());
}

}  // namespace stereogen
