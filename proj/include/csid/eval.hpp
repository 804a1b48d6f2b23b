// Stratified k-fold evaluation of the feature -> GDA -> MLR pipeline,
// confusion matrices and the accuracy report.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/common.hpp"
#include "csid/features.hpp"
#include "csid/gda.hpp"
#include "csid/mlr.hpp"
#include "csid/rng.hpp"

namespace csid {

// ---------------------------------------------------------------------------
// Confusion matrix and accuracy
// ---------------------------------------------------------------------------

inline double accuracy(const Eigen::MatrixXi& confusion) {
    if (confusion.size() == 0) throw metric_error("accuracy: empty confusion matrix");
    const long total = confusion.sum();
    if (total <= 0) throw metric_error("accuracy: confusion matrix total is zero");
    return 100.0 * static_cast<double>(confusion.diagonal().sum()) / static_cast<double>(total);
}

struct EvalReport {
    std::vector<ColorSpaceId> classes;
    Eigen::MatrixXi confusion; // rows true, cols predicted, aggregated over folds
    std::map<ColorSpaceId, double> per_class_accuracy; // percent
    double overall_accuracy = 0.0;
    double fold_std = 0.0;
    std::vector<double> fold_accuracies;
    int folds = 0;
};

inline EvalReport finish_report(std::vector<ColorSpaceId> classes, Eigen::MatrixXi confusion,
                                std::vector<double> fold_accuracies) {
    EvalReport rep;
    rep.classes = std::move(classes);
    rep.confusion = std::move(confusion);
    rep.fold_accuracies = std::move(fold_accuracies);
    rep.folds = static_cast<int>(rep.fold_accuracies.size());
    rep.overall_accuracy = accuracy(rep.confusion);
    for (std::size_t c = 0; c < rep.classes.size(); ++c) {
        const long row_total = rep.confusion.row(static_cast<Eigen::Index>(c)).sum();
        rep.per_class_accuracy[rep.classes[c]] =
            row_total > 0 ? 100.0 * rep.confusion(static_cast<Eigen::Index>(c),
                                                  static_cast<Eigen::Index>(c)) /
                                static_cast<double>(row_total)
                          : 0.0;
    }
    if (rep.fold_accuracies.size() > 1) {
        double mean = 0.0;
        for (double a : rep.fold_accuracies) mean += a;
        mean /= static_cast<double>(rep.fold_accuracies.size());
        double ss = 0.0;
        for (double a : rep.fold_accuracies) ss += (a - mean) * (a - mean);
        rep.fold_std = std::sqrt(ss / static_cast<double>(rep.fold_accuracies.size() - 1));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Stratified folds
// ---------------------------------------------------------------------------

// Class-proportional fold ids; per class the sizes differ by at most one.
inline std::vector<int> stratified_fold_assignment(const std::vector<ColorSpaceId>& labels, int k,
                                                   std::uint64_t seed) {
    if (k < 2) throw argument_error("stratified folds: k must be >= 2");
    std::map<ColorSpaceId, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<int> fold(labels.size(), -1);
    for (auto& [cls, idx] : by_class) {
        if (static_cast<int>(idx.size()) < k) {
            throw stratification_error("class " + to_string(cls) + " has " +
                                       std::to_string(idx.size()) + " samples, fewer than k=" +
                                       std::to_string(k));
        }
        rng r(mix_seed(seed, static_cast<std::uint64_t>(cls) + 101));
        r.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        }
    }
    return fold;
}

// ---------------------------------------------------------------------------
// Trainable pipeline: standardize -> (optional) GDA -> MLR
// ---------------------------------------------------------------------------

struct PipelineCfg {
    bool use_gda = true;
    KernelDesc kernel;
    int gda_out_dim = 4;
    MlrConfig mlr;
    std::vector<double> l2_grid; // >1 entries: nested selection inside the train split
};

struct PipelineModel {
    Standardizer standardizer;
    std::optional<GdaModel> gda;
    MlrModel mlr;
};

namespace detail {

inline std::vector<FeatureVector> standardized(const Standardizer& s,
                                               const std::vector<FeatureVector>& rows) {
    std::vector<FeatureVector> out = rows;
    for (auto& r : out) r.values = s.apply(r.values);
    return out;
}

inline MlrModel train_mlr_with_grid(const std::vector<FeatureVector>& rows, const PipelineCfg& cfg,
                                    std::uint64_t seed) {
    if (cfg.l2_grid.size() <= 1) {
        MlrConfig mc = cfg.mlr;
        if (cfg.l2_grid.size() == 1) mc.l2 = cfg.l2_grid.front();
        return train_mlr(rows, mc);
    }
    // nested 80/20 split, stratified, inside the training data only
    std::vector<ColorSpaceId> labels;
    labels.reserve(rows.size());
    for (const auto& r : rows) labels.push_back(*r.label);
    const auto fold = stratified_fold_assignment(labels, 5, mix_seed(seed, 777));
    std::vector<FeatureVector> inner_train, inner_val;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (fold[i] == 0 ? inner_val : inner_train).push_back(rows[i]);
    }
    double best_l2 = cfg.l2_grid.front();
    double best_acc = -1.0;
    for (double l2 : cfg.l2_grid) {
        MlrConfig mc = cfg.mlr;
        mc.l2 = l2;
        const MlrModel m = train_mlr(inner_train, mc);
        int hits = 0;
        for (const auto& v : inner_val) {
            if (predict(m, v).label == *v.label) ++hits;
        }
        const double acc = static_cast<double>(hits) / static_cast<double>(inner_val.size());
        if (acc > best_acc + 1e-12) {
            best_acc = acc;
            best_l2 = l2;
        }
    }
    MlrConfig mc = cfg.mlr;
    mc.l2 = best_l2;
    return train_mlr(rows, mc);
}

} // namespace detail

inline PipelineModel train_pipeline(const std::vector<FeatureVector>& train,
                                    const PipelineCfg& cfg, std::uint64_t seed) {
    PipelineModel model;
    std::vector<Eigen::VectorXd> raw;
    raw.reserve(train.size());
    for (const auto& f : train) raw.push_back(f.values);
    model.standardizer = Standardizer::fit(raw);

    std::vector<FeatureVector> rows = detail::standardized(model.standardizer, train);
    if (cfg.use_gda) {
        model.gda = fit_gda(rows, cfg.gda_out_dim, cfg.kernel);
        for (auto& r : rows) r = project_gda(*model.gda, r);
    }
    model.mlr = detail::train_mlr_with_grid(rows, cfg, seed);
    return model;
}

inline Prediction predict_pipeline(const PipelineModel& model, const FeatureVector& v) {
    FeatureVector row = v;
    row.values = model.standardizer.apply(row.values);
    if (model.gda) row = project_gda(*model.gda, row);
    return predict(model.mlr, row);
}

// ---------------------------------------------------------------------------
// Stratified cross-validation
// ---------------------------------------------------------------------------

inline EvalReport stratified_cv(const std::vector<FeatureVector>& dataset, int k,
                                const PipelineCfg& cfg, std::uint64_t seed) {
    if (k < 2) throw argument_error("stratified_cv: k must be >= 2");
    std::vector<ColorSpaceId> labels;
    labels.reserve(dataset.size());
    for (const auto& f : dataset) {
        if (!f.label) throw argument_error("stratified_cv: unlabeled feature row");
        labels.push_back(*f.label);
    }
    const auto fold = stratified_fold_assignment(labels, k, seed);

    std::vector<ColorSpaceId> classes;
    for (ColorSpaceId id : kAllSpaces) {
        if (std::find(labels.begin(), labels.end(), id) != labels.end()) classes.push_back(id);
    }
    const auto class_idx = [&](ColorSpaceId id) {
        return static_cast<Eigen::Index>(std::find(classes.begin(), classes.end(), id) -
                                         classes.begin());
    };

    Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(classes.size()),
                                                      static_cast<Eigen::Index>(classes.size()));
    std::vector<double> fold_accuracies;
    for (int f = 0; f < k; ++f) {
        std::vector<FeatureVector> train, test;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            (fold[i] == f ? test : train).push_back(dataset[i]);
        }
        const PipelineModel model = train_pipeline(train, cfg, mix_seed(seed, static_cast<std::uint64_t>(f)));
        Eigen::MatrixXi fold_conf = Eigen::MatrixXi::Zero(confusion.rows(), confusion.cols());
        for (const auto& v : test) {
            const Prediction pred = predict_pipeline(model, v);
            fold_conf(class_idx(*v.label), class_idx(pred.label)) += 1;
        }
        confusion += fold_conf;
        fold_accuracies.push_back(accuracy(fold_conf));
    }
    return finish_report(classes, confusion, fold_accuracies);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    nlohmann::json classes = nlohmann::json::array();
    for (ColorSpaceId id : rep.classes) classes.push_back(to_string(id));
    j["classes"] = classes;
    nlohmann::json confusion = nlohmann::json::array();
    for (Eigen::Index i = 0; i < rep.confusion.rows(); ++i) {
        std::vector<int> row;
        for (Eigen::Index c = 0; c < rep.confusion.cols(); ++c) row.push_back(rep.confusion(i, c));
        confusion.push_back(row);
    }
    j["confusion"] = confusion;
    nlohmann::json per_class;
    for (const auto& [id, acc] : rep.per_class_accuracy) per_class[to_string(id)] = acc;
    j["per_class_accuracy"] = per_class;
    j["overall_accuracy"] = rep.overall_accuracy;
    j["fold_std"] = rep.fold_std;
    j["fold_accuracies"] = rep.fold_accuracies;
    j["folds"] = rep.folds;
    return j;
}

inline std::string report_to_text(const EvalReport& rep, const std::string& title) {
    std::ostringstream out;
    out << title << "\n";
    out << std::left << std::setw(16) << "Color Space"
        << "Accuracy by space (%)\n";
    out << std::fixed << std::setprecision(2);
    for (ColorSpaceId id : rep.classes) {
        out << std::left << std::setw(16) << to_string(id) << rep.per_class_accuracy.at(id) << "\n";
    }
    out << std::left << std::setw(16) << "Overall" << rep.overall_accuracy << " +/- "
        << rep.fold_std << "\n";
    return out.str();
}

} // namespace csid
