// Multinomial logistic regression trained by full-batch gradient descent
// with backtracking line search. Deterministic: no stochastic sampling
// anywhere in the optimizer.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/features.hpp"

namespace csid {

struct MlrModel {
    std::vector<ColorSpaceId> classes; // fixed alphabetical order
    Eigen::MatrixXd weights;           // classes x feature dim
    Eigen::VectorXd biases;
    double l2 = 1e-3;
};

struct MlrConfig {
    double l2 = 1e-3;
    int max_iter = 5000;
    double grad_tol = 1e-6;
    double initial_step = 1.0;
};

namespace detail {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double m = scores.maxCoeff();
    Eigen::VectorXd e = (scores.array() - m).exp();
    return e / e.sum();
}

struct MlrProblem {
    const Eigen::MatrixXd& x; // n x d
    const std::vector<int>& y;
    double l2;

    // mean cross-entropy + (l2/2)*||W||^2 (biases unregularized)
    double loss(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) const {
        const Eigen::Index n = x.rows();
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd scores = w * x.row(i).transpose() + b;
            const double m = scores.maxCoeff();
            const double lse = m + std::log((scores.array() - m).exp().sum());
            total += lse - scores[y[static_cast<std::size_t>(i)]];
        }
        return total / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
    }

    void gradient(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, Eigen::MatrixXd& gw,
                  Eigen::VectorXd& gb) const {
        const Eigen::Index n = x.rows();
        gw = Eigen::MatrixXd::Zero(w.rows(), w.cols());
        gb = Eigen::VectorXd::Zero(b.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd p = softmax(w * x.row(i).transpose() + b);
            p[y[static_cast<std::size_t>(i)]] -= 1.0;
            gw.noalias() += p * x.row(i);
            gb += p;
        }
        gw /= static_cast<double>(n);
        gb /= static_cast<double>(n);
        gw += l2 * w;
    }
};

} // namespace detail

inline MlrModel train_mlr(const std::vector<FeatureVector>& features, const MlrConfig& cfg = {}) {
    if (features.empty()) throw argument_error("train_mlr: no training features");
    const Eigen::Index d = features.front().values.size();

    std::vector<ColorSpaceId> classes;
    for (ColorSpaceId id : kAllSpaces) {
        for (const auto& f : features) {
            if (f.label && *f.label == id) {
                classes.push_back(id);
                break;
            }
        }
    }
    if (classes.size() < 2) {
        throw degenerate_class_error("train_mlr: need at least 2 classes present");
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), d);
    std::vector<int> y(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!features[i].label) throw argument_error("train_mlr: unlabeled feature row");
        if (features[i].values.size() != d) throw argument_error("train_mlr: ragged feature rows");
        if (!features[i].values.allFinite()) {
            throw argument_error("train_mlr: non-finite feature values in '" +
                                 features[i].image_id + "'");
        }
        x.row(static_cast<Eigen::Index>(i)) = features[i].values;
        const auto it = std::find(classes.begin(), classes.end(), *features[i].label);
        y[i] = static_cast<int>(it - classes.begin());
    }

    const detail::MlrProblem problem{x, y, cfg.l2};
    const Eigen::Index n_classes = static_cast<Eigen::Index>(classes.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_classes, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_classes);

    double loss = problem.loss(w, b);
    double step = cfg.initial_step;
    Eigen::MatrixXd gw;
    Eigen::VectorXd gb;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        problem.gradient(w, b, gw, gb);
        const double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
        if (std::sqrt(gnorm2) < cfg.grad_tol) break;

        // Armijo backtracking; the accepted step seeds the next iteration
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            const Eigen::MatrixXd w_new = w - step * gw;
            const Eigen::VectorXd b_new = b - step * gb;
            const double loss_new = problem.loss(w_new, b_new);
            if (loss_new <= loss - 1e-4 * step * gnorm2) {
                w = w_new;
                b = b_new;
                loss = loss_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // step underflow: gradient no longer a descent direction
        step = std::min(step * 2.0, 1e6);
    }

    MlrModel model;
    model.classes = classes;
    model.weights = w;
    model.biases = b;
    model.l2 = cfg.l2;
    return model;
}

struct Prediction {
    ColorSpaceId label;
    Eigen::VectorXd probabilities; // aligned with model.classes
};

inline Prediction predict(const MlrModel& model, const Eigen::VectorXd& values) {
    if (values.size() != model.weights.cols()) {
        throw argument_error("predict: feature length " + std::to_string(values.size()) +
                             " does not match model dimension " +
                             std::to_string(model.weights.cols()));
    }
    Prediction out;
    out.probabilities = detail::softmax(model.weights * values + model.biases);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < out.probabilities.size(); ++c) {
        if (out.probabilities[c] > out.probabilities[best]) best = c; // ties keep class order
    }
    out.label = model.classes[static_cast<std::size_t>(best)];
    return out;
}

inline Prediction predict(const MlrModel& model, const FeatureVector& v) {
    return predict(model, v.values);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json mlr_to_json(const MlrModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    nlohmann::json classes = nlohmann::json::array();
    for (ColorSpaceId id : m.classes) classes.push_back(to_string(id));
    j["classes"] = classes;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
        rows.push_back(std::vector<double>(m.weights.row(i).begin(), m.weights.row(i).end()));
    }
    j["weights"] = rows;
    j["biases"] = std::vector<double>(m.biases.begin(), m.biases.end());
    j["l2"] = m.l2;
    return j;
}

inline MlrModel mlr_from_json(const nlohmann::json& j) {
    MlrModel m;
    for (const auto& name : j.at("classes")) m.classes.push_back(space_from_string(name));
    const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
    m.weights.resize(static_cast<Eigen::Index>(rows.size()),
                     rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.weights.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(
            rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
    }
    const auto biases = j.at("biases").get<std::vector<double>>();
    m.biases = Eigen::Map<const Eigen::VectorXd>(biases.data(),
                                                 static_cast<Eigen::Index>(biases.size()));
    m.l2 = j.at("l2").get<double>();
    return m;
}

} // namespace csid
