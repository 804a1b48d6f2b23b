// End-to-end orchestration used by the CLI subcommands: resumable feature
// extraction over a dataset manifest, bundle training, cross-validated
// evaluation and the residual-normality diagnosis.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "csid/bundle.hpp"
#include "csid/config.hpp"
#include "csid/dataset.hpp"
#include "csid/diagnostics.hpp"
#include "csid/embedding.hpp"
#include "csid/eval.hpp"
#include "csid/features.hpp"
#include "csid/gamut.hpp"
#include "csid/image_io.hpp"
#include "csid/parallel.hpp"

namespace csid {

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ExtractOutcome {
    std::size_t extracted = 0;
    std::size_t resumed = 0;
    std::vector<std::string> failures; // "file: reason"
};

// Extracts features for every manifest row not already in the store. Rows
// are keyed by (image_id, mode, J, seed); per-image fit seeds do not depend
// on extraction order, so parallel runs produce identical values.
inline ExtractOutcome run_extract(const PipelineConfig& cfg, const std::string& dataset_dir,
                                  const std::string& store_path) {
    const auto manifest =
        load_manifest((std::filesystem::path(dataset_dir) / kManifestName).string());
    std::set<std::tuple<std::string, std::string, int, std::uint64_t>> existing;
    for (const auto& row : load_feature_store(store_path)) {
        existing.insert({row.feature.image_id, to_string(row.feature.mode), row.feature.J, row.seed});
    }

    std::vector<ManifestRow> todo;
    ExtractOutcome outcome;
    for (const auto& row : manifest) {
        if (existing.count({row.file, to_string(cfg.mode), cfg.J, cfg.seed})) {
            ++outcome.resumed;
        } else {
            todo.push_back(row);
        }
    }

    FeatureConfig fc;
    fc.fit = cfg.fit;
    fc.fit.seed = cfg.seed;
    fc.M_candidates = cfg.M_candidates;

    std::ofstream out(store_path, std::ios::app);
    if (!out) throw dataset_error("cannot open feature store '" + store_path + "'");
    std::mutex io_mutex;
    parallel_for(todo.size(), cfg.jobs, [&](std::size_t i) {
        const ManifestRow& row = todo[i];
        try {
            const ImageRGB img =
                load_image((std::filesystem::path(dataset_dir) / row.file).string());
            FeatureVector fv = extract_features(img, row.file, cfg.mode, cfg.J, fc);
            if (!fv.label) fv.label = row.space;
            std::lock_guard<std::mutex> lock(io_mutex);
            append_feature_row(out, {fv, cfg.seed});
            ++outcome.extracted;
        } catch (const error& e) {
            std::lock_guard<std::mutex> lock(io_mutex);
            outcome.failures.push_back(row.file + ": " + e.what());
        }
    });
    return outcome;
}

// Store rows matching the active (mode, J, seed), sorted by image id so that
// downstream fold assignment is independent of extraction order.
inline std::vector<FeatureVector> load_matching_features(const PipelineConfig& cfg,
                                                         const std::string& store_path) {
    std::vector<FeatureVector> features;
    for (const auto& row : load_feature_store(store_path)) {
        if (row.feature.mode == cfg.mode && row.feature.J == cfg.J && row.seed == cfg.seed) {
            features.push_back(row.feature);
        }
    }
    std::sort(features.begin(), features.end(),
              [](const FeatureVector& a, const FeatureVector& b) { return a.image_id < b.image_id; });
    if (features.empty()) {
        throw dataset_error("no feature rows in '" + store_path + "' match mode=" +
                            to_string(cfg.mode) + " J=" + std::to_string(cfg.J) +
                            " seed=" + std::to_string(cfg.seed));
    }
    return features;
}

// ---------------------------------------------------------------------------
// Training and identification
// ---------------------------------------------------------------------------

inline ModelBundle run_train(const PipelineConfig& cfg, const std::string& store_path) {
    const auto features = load_matching_features(cfg, store_path);
    ModelBundle bundle;
    bundle.config = cfg;
    bundle.fingerprint = config_fingerprint(cfg);
    bundle.pipeline = train_pipeline(features, cfg.pipeline, cfg.seed);
    return bundle;
}

inline Prediction identify_image(const ModelBundle& bundle, const std::string& image_path) {
    // refuse bundles whose fingerprint disagrees with the extraction settings
    if (config_fingerprint(bundle.config) != bundle.fingerprint) {
        throw bundle_mismatch_error("bundle fingerprint does not match its extraction settings");
    }
    const ImageRGB img = load_image(image_path);
    FeatureConfig fc;
    fc.fit = bundle.config.fit;
    fc.fit.seed = bundle.config.seed;
    fc.M_candidates = bundle.config.M_candidates;
    FeatureVector fv = extract_features(img, std::filesystem::path(image_path).filename().string(),
                                        bundle.config.mode, bundle.config.J, fc);
    if (fv.values.size() != bundle.pipeline.standardizer.mean.size()) {
        throw bundle_mismatch_error("feature length " + std::to_string(fv.values.size()) +
                                    " does not match bundle dimension " +
                                    std::to_string(bundle.pipeline.standardizer.mean.size()));
    }
    return predict_pipeline(bundle.pipeline, fv);
}

inline EvalReport run_evaluate(const PipelineConfig& cfg, const std::string& store_path) {
    const auto features = load_matching_features(cfg, store_path);
    return stratified_cv(features, cfg.folds, cfg.pipeline, cfg.seed);
}

// ---------------------------------------------------------------------------
// Diagnosis (K-S residual normality, per image and pair)
// ---------------------------------------------------------------------------

struct DiagnoseRow {
    std::string image_id;
    ChannelPair pair;
    std::size_t n = 0;
    KsReport full;                    // plain OLS residuals, all interior pixels
    std::optional<KsReport> weighted; // residuals of pixels with tau0 > 0.5
    double pi0 = 0.0;
    double tau_fraction = 0.0;        // fraction of pixels with tau0 > 0.5
};

struct DiagnoseReport {
    std::vector<DiagnoseRow> rows;
    double full_rejection_rate = 0.0;
    double weighted_rejection_rate = 0.0;
    double mean_excess_kurtosis = 0.0;
    double mean_pi0 = 0.0; // corpus-level fraction of Gaussian-compatible pixels
    std::vector<std::string> skipped;
};

inline DiagnoseRow diagnose_pair(const ImageRGB& img, const std::string& image_id,
                                 const ChannelPair& pair, int J, const FitConfig& fit,
                                 const std::vector<int>& M_candidates, double alpha_level) {
    DiagnoseRow row;
    row.image_id = image_id;
    row.pair = pair;
    const RegressionData data =
        build_design(img.planes[static_cast<std::size_t>(pair.k1)],
                     img.planes[static_cast<std::size_t>(pair.k2)], pair, J);
    row.n = static_cast<std::size_t>(data.rows());

    // plain OLS residuals over every interior pixel
    const NormalEquations ne =
        accumulate_normal_equations(data, Eigen::VectorXd::Ones(data.rows()));
    const GammaSolution ols = solve_gamma(ne.A, ne.Y);
    const Eigen::VectorXd residual = data.responses - data.neighbors * ols.gamma;
    row.full = ks_normality_diagnostic(
        std::vector<double>(residual.begin(), residual.end()), alpha_level);

    // EM fit; the tau0-weighted subset retests only pixels the model deems
    // embeddable
    int M = M_candidates.empty() ? 2 : M_candidates.front();
    EmbeddingModel model;
    if (M_candidates.size() > 1) {
        AicSelection sel = select_M_by_aic(img.planes[static_cast<std::size_t>(pair.k1)],
                                           img.planes[static_cast<std::size_t>(pair.k2)], pair, J,
                                           M_candidates, fit);
        model = std::move(sel.model);
    } else {
        model = fit_embedding_on_design(data, pair, J, M, fit);
    }
    row.pi0 = model.pi[0];
    const Responsibilities resp = e_step(data, model);
    const Eigen::VectorXd em_residual =
        data.responses - data.neighbors * model.embeddable.gamma;
    std::vector<double> subset;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (resp.tau0[i] > 0.5) subset.push_back(em_residual[i]);
    }
    row.tau_fraction = static_cast<double>(subset.size()) / static_cast<double>(data.rows());
    if (subset.size() >= 8) row.weighted = ks_normality_diagnostic(subset, alpha_level);
    return row;
}

inline DiagnoseReport run_diagnose(const PipelineConfig& cfg, const std::string& dataset_dir,
                                   std::size_t limit = 0, double alpha_level = 0.05) {
    std::vector<std::filesystem::path> files = list_images_sorted(dataset_dir);
    if (files.empty()) throw dataset_error("no images in '" + dataset_dir + "'");
    if (limit > 0 && files.size() > limit) files.resize(limit);

    const auto pairs = pairs_for_mode(cfg.mode == FeatureMode::concat ? FeatureMode::intra : cfg.mode);
    struct Slot {
        std::vector<DiagnoseRow> rows;
        std::vector<std::string> skipped;
    };
    std::vector<Slot> slots(files.size());
    parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
        const std::string id = files[i].filename().string();
        try {
            const ImageRGB img = load_image(files[i].string());
            for (const auto& pair : pairs) {
                FitConfig fit = cfg.fit;
                fit.seed = pair_fit_seed(cfg.seed, id, pair, cfg.J);
                try {
                    slots[i].rows.push_back(
                        diagnose_pair(img, id, pair, cfg.J, fit, cfg.M_candidates, alpha_level));
                } catch (const error& e) {
                    slots[i].skipped.push_back(id + " pair(" + std::to_string(pair.k1) + "," +
                                               std::to_string(pair.k2) + "): " + e.what());
                }
            }
        } catch (const error& e) {
            slots[i].skipped.push_back(id + ": " + e.what());
        }
    });

    DiagnoseReport report;
    for (auto& slot : slots) {
        for (auto& r : slot.rows) report.rows.push_back(std::move(r));
        for (auto& s : slot.skipped) report.skipped.push_back(std::move(s));
    }
    if (!report.rows.empty()) {
        std::size_t full_rej = 0, w_rej = 0, w_total = 0;
        for (const auto& r : report.rows) {
            full_rej += r.full.reject ? 1 : 0;
            report.mean_excess_kurtosis += r.full.excess_kurtosis;
            report.mean_pi0 += r.pi0;
            if (r.weighted) {
                ++w_total;
                w_rej += r.weighted->reject ? 1 : 0;
            }
        }
        const double n = static_cast<double>(report.rows.size());
        report.full_rejection_rate = static_cast<double>(full_rej) / n;
        report.mean_excess_kurtosis /= n;
        report.mean_pi0 /= n;
        report.weighted_rejection_rate =
            w_total > 0 ? static_cast<double>(w_rej) / static_cast<double>(w_total) : 0.0;
    }
    return report;
}

inline nlohmann::json diagnose_to_json(const DiagnoseReport& rep) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row;
        row["image_id"] = r.image_id;
        row["pair"] = {r.pair.k1, r.pair.k2};
        row["n"] = r.n;
        row["full"] = {{"statistic", r.full.statistic},
                       {"critical", r.full.critical},
                       {"reject", r.full.reject},
                       {"excess_kurtosis", r.full.excess_kurtosis},
                       {"degenerate", r.full.degenerate}};
        if (r.weighted) {
            row["weighted"] = {{"statistic", r.weighted->statistic},
                               {"critical", r.weighted->critical},
                               {"reject", r.weighted->reject},
                               {"excess_kurtosis", r.weighted->excess_kurtosis}};
        } else {
            row["weighted"] = nullptr;
        }
        row["pi0"] = r.pi0;
        row["tau_fraction"] = r.tau_fraction;
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["full_rejection_rate"] = rep.full_rejection_rate;
    j["weighted_rejection_rate"] = rep.weighted_rejection_rate;
    j["mean_excess_kurtosis"] = rep.mean_excess_kurtosis;
    j["gaussian_pixel_fraction"] = rep.mean_pi0;
    j["skipped"] = rep.skipped;
    return j;
}

// Atomic file write: temp then rename.
inline void write_text_atomic(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw dataset_error("cannot write '" + tmp + "'");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace csid
