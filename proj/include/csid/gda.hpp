// Generalized (kernel) discriminant analysis: supervised reduction of the
// embedding features to at most classes-1 coordinates.
//
// Solves the centered-kernel eigenproblem between-class vs total scatter and
// keeps the leading directions. The RBF bandwidth defaults to the median
// pairwise distance of the training set; a linear kernel degrades the method
// to classical LDA for ablation.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/common.hpp"
#include "csid/features.hpp"

namespace csid {

struct KernelDesc {
    enum class Kind { rbf, linear };
    Kind kind = Kind::rbf;
    double bandwidth = 0.0; // 0 = median pairwise distance heuristic

    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        if (kind == Kind::linear) return a.dot(b);
        const double d2 = (a - b).squaredNorm();
        return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
    }
};

struct GdaModel {
    KernelDesc kernel;
    int out_dim = 0;
    Eigen::MatrixXd reference_points;   // n x d training vectors
    Eigen::MatrixXd alpha;              // n x out_dim dual coefficients
    Eigen::VectorXd kernel_col_means;   // per-reference mean of the training kernel
    double kernel_grand_mean = 0.0;
    Eigen::MatrixXd train_projections;  // n x out_dim
};

namespace detail {

inline double median_pairwise_distance(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index stride = n > 1200 ? n / 1200 + 1 : 1;
    std::vector<double> d;
    for (Eigen::Index i = 0; i < n; i += stride) {
        for (Eigen::Index j = i + stride; j < n; j += stride) {
            d.push_back((x.row(i) - x.row(j)).norm());
        }
    }
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    const double med = d[d.size() / 2];
    return med > 0.0 ? med : 1.0;
}

} // namespace detail

inline GdaModel fit_gda(const std::vector<FeatureVector>& features, int out_dim,
                        KernelDesc kernel = {}) {
    if (features.empty()) throw argument_error("fit_gda: no training features");
    const Eigen::Index n = static_cast<Eigen::Index>(features.size());
    const Eigen::Index d = features.front().values.size();

    std::map<ColorSpaceId, int> class_counts;
    std::vector<int> label_of(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!features[i].label) throw argument_error("fit_gda: unlabeled feature row");
        if (features[i].values.size() != d) throw argument_error("fit_gda: ragged feature rows");
        class_counts[*features[i].label]++;
    }
    if (class_counts.size() < 2) {
        throw degenerate_class_error("fit_gda: need at least 2 classes, got " +
                                     std::to_string(class_counts.size()));
    }
    for (const auto& [cls, count] : class_counts) {
        if (count < 2) {
            throw degenerate_class_error("fit_gda: class " + to_string(cls) +
                                         " has fewer than 2 samples");
        }
    }
    std::map<ColorSpaceId, int> class_index;
    for (const auto& [cls, count] : class_counts) {
        const int idx = static_cast<int>(class_index.size());
        class_index[cls] = idx;
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
        label_of[i] = class_index[*features[i].label];
    }
    const int n_classes = static_cast<int>(class_counts.size());

    GdaModel model;
    model.out_dim = std::min(out_dim, n_classes - 1);
    model.reference_points.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        model.reference_points.row(i) = features[static_cast<std::size_t>(i)].values;
    }
    model.kernel = kernel;
    if (model.kernel.kind == KernelDesc::Kind::rbf && model.kernel.bandwidth <= 0.0) {
        model.kernel.bandwidth = detail::median_pairwise_distance(model.reference_points);
    }

    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = model.kernel(model.reference_points.row(i).transpose(),
                                          model.reference_points.row(j).transpose());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    model.kernel_col_means = K.colwise().mean();
    model.kernel_grand_mean = K.mean();

    Eigen::MatrixXd Kc = K;
    Kc.rowwise() -= model.kernel_col_means.transpose();
    Kc.colwise() -= model.kernel_col_means;
    Kc.array() += model.kernel_grand_mean;

    // Work in the principal subspace of the centered kernel: directions with
    // eigenvalue below eps carry no data variance and would otherwise leak
    // spurious discriminants through the regularizer.
    const double eps = 1e-8 * Kc.trace() / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> kc_eig(Kc);
    if (kc_eig.info() != Eigen::Success) {
        throw fit_failure_error("fit_gda: kernel eigendecomposition failed");
    }
    const double lam_max = kc_eig.eigenvalues().maxCoeff();
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (kc_eig.eigenvalues()[i] > std::max(eps, 1e-12 * lam_max)) kept.push_back(i);
    }
    const Eigen::Index r = static_cast<Eigen::Index>(kept.size());
    if (r < 1) throw fit_failure_error("fit_gda: centered kernel has no usable variance");
    Eigen::MatrixXd U(n, r);
    Eigen::VectorXd lam(r);
    for (Eigen::Index k = 0; k < r; ++k) {
        U.col(k) = kc_eig.eigenvectors().col(kept[static_cast<std::size_t>(k)]);
        lam[k] = kc_eig.eigenvalues()[kept[static_cast<std::size_t>(k)]];
    }

    // class-block weight matrix: W_ij = 1/n_c when i and j share class c
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    {
        std::vector<double> inv_count(static_cast<std::size_t>(n_classes), 0.0);
        for (const auto& [cls, count] : class_counts) {
            inv_count[static_cast<std::size_t>(class_index[cls])] = 1.0 / count;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (label_of[static_cast<std::size_t>(i)] == label_of[static_cast<std::size_t>(j)]) {
                    W(i, j) = inv_count[static_cast<std::size_t>(label_of[static_cast<std::size_t>(i)])];
                }
            }
        }
    }

    // between-class vs total scatter in the reduced coordinates Z = U lam^1/2
    const Eigen::MatrixXd Z = U * lam.cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd between = Z.transpose() * W * Z;
    const Eigen::MatrixXd total = lam.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(between, total);
    if (solver.info() != Eigen::Success) {
        throw fit_failure_error("fit_gda: generalized eigensolver failed");
    }

    // eigenvalues come back ascending; keep the top out_dim and map the
    // reduced eigenvectors back to dual coefficients
    model.out_dim = std::min<int>(model.out_dim, static_cast<int>(r));
    model.alpha.resize(n, model.out_dim);
    for (int k = 0; k < model.out_dim; ++k) {
        const Eigen::VectorXd v = solver.eigenvectors().col(r - 1 - k);
        model.alpha.col(k) = U * lam.cwiseSqrt().cwiseInverse().asDiagonal() * v;
    }
    model.train_projections = Kc * model.alpha;
    return model;
}

inline Eigen::VectorXd project_values(const GdaModel& model, const Eigen::VectorXd& v) {
    if (v.size() != model.reference_points.cols()) {
        throw argument_error("project_gda: feature length " + std::to_string(v.size()) +
                             " does not match training dimension " +
                             std::to_string(model.reference_points.cols()));
    }
    const Eigen::Index n = model.reference_points.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k[i] = model.kernel(model.reference_points.row(i).transpose(), v);
    }
    const double k_mean = k.mean();
    const Eigen::VectorXd centered =
        k - model.kernel_col_means - Eigen::VectorXd::Constant(n, k_mean - model.kernel_grand_mean);
    return model.alpha.transpose() * centered;
}

inline FeatureVector project_gda(const GdaModel& model, const FeatureVector& v) {
    FeatureVector out = v;
    out.values = project_values(model, v.values);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(
            rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
    }
    return m;
}

} // namespace detail

inline nlohmann::json gda_to_json(const GdaModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["kernel"] = {{"type", m.kernel.kind == KernelDesc::Kind::rbf ? "rbf" : "linear"},
                   {"bandwidth", m.kernel.bandwidth}};
    j["out_dim"] = m.out_dim;
    j["reference_points"] = detail::matrix_to_json(m.reference_points);
    j["alpha"] = detail::matrix_to_json(m.alpha);
    j["kernel_col_means"] =
        std::vector<double>(m.kernel_col_means.begin(), m.kernel_col_means.end());
    j["kernel_grand_mean"] = m.kernel_grand_mean;
    j["train_projections"] = detail::matrix_to_json(m.train_projections);
    return j;
}

inline GdaModel gda_from_json(const nlohmann::json& j) {
    GdaModel m;
    const std::string kind = j.at("kernel").at("type").get<std::string>();
    m.kernel.kind = kind == "linear" ? KernelDesc::Kind::linear : KernelDesc::Kind::rbf;
    m.kernel.bandwidth = j.at("kernel").at("bandwidth").get<double>();
    m.out_dim = j.at("out_dim").get<int>();
    m.reference_points = detail::matrix_from_json(j.at("reference_points"));
    m.alpha = detail::matrix_from_json(j.at("alpha"));
    const auto cm = j.at("kernel_col_means").get<std::vector<double>>();
    m.kernel_col_means =
        Eigen::Map<const Eigen::VectorXd>(cm.data(), static_cast<Eigen::Index>(cm.size()));
    m.kernel_grand_mean = j.at("kernel_grand_mean").get<double>();
    m.train_projections = detail::matrix_from_json(j.at("train_projections"));
    return m;
}

} // namespace csid
