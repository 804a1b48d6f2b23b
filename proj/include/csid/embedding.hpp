// Two-level EM model of pixel embedding.
//
// A pixel either embeds linearly over its (2J+1)^2 neighborhood with Gaussian
// residual (gamma, sigma), or it is drawn from an M-component Gaussian
// mixture with shared variance. An outer EM weighs the two regimes (pi,
// tau); an inner EM fits the mixture (alpha, mu, lambda, iota). All
// densities are evaluated in log space.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csid/common.hpp"
#include "csid/image.hpp"
#include "csid/rng.hpp"

namespace csid {

// ---------------------------------------------------------------------------
// Data & parameter types
// ---------------------------------------------------------------------------

struct RegressionData {
    Eigen::VectorXd responses;              // I_{k1}(m,n) at interior pixels
    Eigen::MatrixXd neighbors;              // one row per interior pixel
    std::vector<std::pair<int, int>> pixel_index; // (m,n) = (row, col)

    Eigen::Index rows() const { return neighbors.rows(); }
    Eigen::Index cols() const { return neighbors.cols(); }
};

struct EmbeddableParams {
    Eigen::VectorXd gamma;
    double sigma = 1.0;
};

struct MixtureParams {
    int M = 1;
    Eigen::VectorXd alphas; // simplex weights
    Eigen::VectorXd mus;
    double lambda = 1.0;    // shared standard deviation
};

struct EmbeddingModel {
    ChannelPair pair;
    int J = 1;
    Eigen::Vector2d pi{0.5, 0.5}; // (pi0 embeddable, pi1 mixture)
    EmbeddableParams embeddable;
    MixtureParams mixture;
    double final_loglik = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool uniform_component = false; // ablation: U[0,1] replaces the mixture

    // fit metadata
    std::vector<double> loglik_trace;  // init value followed by one entry per iteration
    std::vector<int> reseed_iterations;
    std::vector<std::string> notes;
};

struct Responsibilities {
    Eigen::VectorXd tau0;  // posterior of the embeddable indicator
    Eigen::MatrixXd iota;  // per-pixel, per-component posteriors (given non-embeddable)
};

struct FitConfig {
    double tol = 1e-6;        // relative log-likelihood change
    int max_iter = 200;
    int restarts = 3;
    std::uint64_t seed = 0;
    double sigma_floor = 1e-6;
    double lambda_floor = 1e-6;
    int kmeans_iters = 20;
    bool uniform_component = false;
};

// ---------------------------------------------------------------------------
// Design construction
// ---------------------------------------------------------------------------

// Row-major neighborhood sweep over [-J,J]^2; the center column is dropped in
// intra mode (gamma_{0,0}=0 when k1=k2) and kept in inter mode.
inline std::vector<std::pair<int, int>> neighborhood_offsets(int J, bool intra) {
    std::vector<std::pair<int, int>> offs;
    offs.reserve(static_cast<std::size_t>((2 * J + 1) * (2 * J + 1)));
    for (int i = -J; i <= J; ++i) {
        for (int j = -J; j <= J; ++j) {
            if (intra && i == 0 && j == 0) continue;
            offs.emplace_back(i, j);
        }
    }
    return offs;
}

inline RegressionData build_design(const ChannelPlane& plane_k1, const ChannelPlane& plane_k2,
                                   const ChannelPair& pair, int J) {
    if (plane_k1.width != plane_k2.width || plane_k1.height != plane_k2.height) {
        throw geometry_error("build_design: planes disagree in size");
    }
    if (J < 0) throw argument_error("build_design: J must be non-negative");
    if (plane_k1.width <= 2 * J || plane_k1.height <= 2 * J) {
        throw geometry_error("build_design: plane " + std::to_string(plane_k1.width) + "x" +
                             std::to_string(plane_k1.height) + " too small for J=" + std::to_string(J));
    }
    const auto offs = neighborhood_offsets(J, pair.intra());
    const int h = plane_k1.height, w = plane_k1.width;
    const Eigen::Index nrows = static_cast<Eigen::Index>(h - 2 * J) * (w - 2 * J);
    const Eigen::Index ncols = static_cast<Eigen::Index>(offs.size());

    RegressionData data;
    data.responses.resize(nrows);
    data.neighbors.resize(nrows, ncols);
    data.pixel_index.reserve(static_cast<std::size_t>(nrows));
    Eigen::Index r = 0;
    for (int m = J; m < h - J; ++m) {
        for (int n = J; n < w - J; ++n, ++r) {
            data.responses[r] = plane_k1.at(m, n);
            for (Eigen::Index c = 0; c < ncols; ++c) {
                const auto [i, j] = offs[static_cast<std::size_t>(c)];
                data.neighbors(r, c) = plane_k2.at(m + i, n + j);
            }
            data.pixel_index.emplace_back(m, n);
        }
    }
    return data;
}

inline Eigen::VectorXd predict_embeddable(const RegressionData& data, const Eigen::VectorXd& gamma) {
    if (gamma.size() != data.cols()) {
        throw argument_error("predict_embeddable: gamma length " + std::to_string(gamma.size()) +
                             " does not match " + std::to_string(data.cols()) + " columns");
    }
    return data.neighbors * gamma;
}

// ---------------------------------------------------------------------------
// Log densities
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056;

inline double log_normal(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -kLogSqrt2Pi - std::log(sigma) - 0.5 * z * z;
}

inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Per-pixel log density of the non-embeddable component and, when requested,
// the component posteriors iota.
inline Eigen::VectorXd mixture_logdensity(const Eigen::VectorXd& y, const MixtureParams& mix,
                                          bool uniform_component, Eigen::MatrixXd* iota_out) {
    const Eigen::Index n = y.size();
    if (uniform_component) {
        if (iota_out) *iota_out = Eigen::MatrixXd::Ones(n, 1);
        return Eigen::VectorXd::Zero(n); // log U[0,1] = 0
    }
    const int M = mix.M;
    Eigen::VectorXd log_alpha(M);
    for (int c = 0; c < M; ++c) {
        log_alpha[c] = mix.alphas[c] > 0 ? std::log(mix.alphas[c])
                                         : -std::numeric_limits<double>::infinity();
    }
    Eigen::VectorXd out(n);
    if (iota_out) iota_out->resize(n, M);
    Eigen::VectorXd lc(M);
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < M; ++c) {
            lc[c] = log_alpha[c] + log_normal(y[i], mix.mus[c], mix.lambda);
            m = std::max(m, lc[c]);
        }
        double s = 0.0;
        for (int c = 0; c < M; ++c) s += std::exp(lc[c] - m);
        const double lse = m + std::log(s);
        out[i] = lse;
        if (iota_out) {
            for (int c = 0; c < M; ++c) (*iota_out)(i, c) = std::exp(lc[c] - lse);
        }
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// E-step, M-step, likelihood
// ---------------------------------------------------------------------------

inline Responsibilities e_step(const RegressionData& data, const EmbeddingModel& model) {
    const Eigen::Index n = data.rows();
    const Eigen::VectorXd pred = predict_embeddable(data, model.embeddable.gamma);
    Responsibilities resp;
    resp.tau0.resize(n);

    const double log_pi0 = model.pi[0] > 0 ? std::log(model.pi[0])
                                           : -std::numeric_limits<double>::infinity();
    const double log_pi1 = model.pi[1] > 0 ? std::log(model.pi[1])
                                           : -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd lmix =
        detail::mixture_logdensity(data.responses, model.mixture, model.uniform_component, &resp.iota);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double l0 = log_pi0 + detail::log_normal(data.responses[i], pred[i], model.embeddable.sigma);
        const double l1 = log_pi1 + lmix[i];
        const double lse = detail::log_add(l0, l1);
        resp.tau0[i] = std::isfinite(lse) ? std::exp(l0 - lse) : 0.5;
    }
    return resp;
}

struct NormalEquations {
    Eigen::MatrixXd A;
    Eigen::VectorXd Y;
};

// A[p][q] = sum_i tau0_i x_ip x_iq, Y[p] = sum_i tau0_i y_i x_ip.
inline NormalEquations accumulate_normal_equations(const RegressionData& data,
                                                   const Eigen::VectorXd& tau0) {
    NormalEquations ne;
    const Eigen::MatrixXd weighted = tau0.asDiagonal() * data.neighbors;
    ne.A.noalias() = data.neighbors.transpose() * weighted;
    ne.A = 0.5 * (ne.A + ne.A.transpose()).eval(); // exact symmetry
    ne.Y.noalias() = data.neighbors.transpose() * tau0.cwiseProduct(data.responses);
    return ne;
}

struct GammaSolution {
    Eigen::VectorXd gamma;
    bool used_ridge = false;
};

// Solves A gamma = Y, falling back to A + eps*I (eps = 1e-8 * trace/dim) when
// the plain solve is numerically singular.
inline GammaSolution solve_gamma(const Eigen::MatrixXd& A, const Eigen::VectorXd& Y) {
    if (A.rows() != A.cols() || A.rows() != Y.size()) {
        throw argument_error("solve_gamma: dimension mismatch");
    }
    if (A.cwiseAbs().maxCoeff() == 0.0) {
        throw singular_system_error("solve_gamma: all-zero normal matrix");
    }
    const double y_norm = std::max(Y.norm(), std::numeric_limits<double>::min());
    GammaSolution sol;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt = A.ldlt();
    sol.gamma = ldlt.solve(Y);
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    const bool rank_deficient = pivots.minCoeff() < 1e-12 * pivots.maxCoeff();
    const bool ok = !rank_deficient && sol.gamma.allFinite() &&
                    (A * sol.gamma - Y).norm() <= 1e-9 * std::max(1.0, y_norm);
    if (!ok) {
        const double eps = 1e-8 * A.trace() / static_cast<double>(A.rows());
        Eigen::MatrixXd ridged = A;
        ridged.diagonal().array() += eps;
        sol.gamma = ridged.ldlt().solve(Y);
        sol.used_ridge = true;
        if (!sol.gamma.allFinite()) {
            throw singular_system_error("solve_gamma: ridge fallback produced non-finite solution");
        }
    }
    return sol;
}

// One M-step: pi from tau, gamma by weighted normal equations, sigma^2 from
// the new gamma, then the mixture updates (alpha, shared lambda^2 against the
// previous means, then the means). `fit_rng` seeds dead-component reseeds;
// without it the reseed picks a deterministic response.
inline EmbeddingModel m_step(const RegressionData& data, const Responsibilities& resp,
                             const EmbeddingModel& prev, rng* fit_rng = nullptr,
                             double sigma_floor = 1e-6, double lambda_floor = 1e-6,
                             int iteration = 0) {
    const Eigen::Index n = data.rows();
    const Eigen::VectorXd tau1 = Eigen::VectorXd::Ones(n) - resp.tau0;
    const double t0_sum = resp.tau0.sum();
    const double t1_sum = tau1.sum();

    EmbeddingModel next = prev;
    next.pi[0] = t0_sum / static_cast<double>(n);
    next.pi[1] = t1_sum / static_cast<double>(n);

    if (t0_sum > 1e-12) {
        const NormalEquations ne = accumulate_normal_equations(data, resp.tau0);
        GammaSolution sol = solve_gamma(ne.A, ne.Y);
        next.embeddable.gamma = std::move(sol.gamma);
        if (sol.used_ridge &&
            (next.notes.empty() || next.notes.back() != "ridge fallback in gamma solve")) {
            next.notes.push_back("ridge fallback in gamma solve");
        }
        const Eigen::VectorXd residual = data.responses - data.neighbors * next.embeddable.gamma;
        const double ss = resp.tau0.dot(residual.cwiseAbs2());
        next.embeddable.sigma = std::max(std::sqrt(ss / t0_sum), sigma_floor);
    }

    if (!prev.uniform_component && t1_sum > 1e-12) {
        const int M = prev.mixture.M;
        Eigen::VectorXd w(M);
        Eigen::VectorXd y_weighted(M);
        for (int c = 0; c < M; ++c) {
            const Eigen::VectorXd tw = tau1.cwiseProduct(resp.iota.col(c));
            w[c] = tw.sum();
            y_weighted[c] = tw.dot(data.responses);
        }

        // lambda^2 against the previous means (Eq. order), before mu moves
        double lam_ss = 0.0;
        for (int c = 0; c < M; ++c) {
            const Eigen::ArrayXd d = data.responses.array() - prev.mixture.mus[c];
            lam_ss += (tau1.array() * resp.iota.col(c).array() * d.square()).sum();
        }
        next.mixture.lambda = std::max(std::sqrt(lam_ss / t1_sum), lambda_floor);

        for (int c = 0; c < M; ++c) {
            if (w[c] < 1e-12) {
                const Eigen::Index pick = fit_rng
                    ? static_cast<Eigen::Index>(fit_rng->below(static_cast<std::uint64_t>(n)))
                    : static_cast<Eigen::Index>((static_cast<std::uint64_t>(c) * 2654435761ULL) %
                                                static_cast<std::uint64_t>(n));
                next.mixture.mus[c] = data.responses[pick];
                w[c] = 1e-6 * t1_sum;
                next.reseed_iterations.push_back(iteration);
                next.notes.push_back("component " + std::to_string(c) + " reseeded at iteration " +
                                     std::to_string(iteration));
            } else {
                next.mixture.mus[c] = y_weighted[c] / w[c];
            }
        }
        next.mixture.alphas = w / w.sum();
    }
    return next;
}

// Observed-data log-likelihood:
// sum_i log[pi0 N(y_i | x_i.gamma, sigma^2) + pi1 sum_c alpha_c N(y_i | mu_c, lambda^2)]
inline double observed_loglik(const RegressionData& data, const EmbeddingModel& model) {
    const Eigen::VectorXd pred = predict_embeddable(data, model.embeddable.gamma);
    const Eigen::VectorXd lmix =
        detail::mixture_logdensity(data.responses, model.mixture, model.uniform_component, nullptr);
    const double log_pi0 = model.pi[0] > 0 ? std::log(model.pi[0])
                                           : -std::numeric_limits<double>::infinity();
    const double log_pi1 = model.pi[1] > 0 ? std::log(model.pi[1])
                                           : -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double l0 = log_pi0 + detail::log_normal(data.responses[i], pred[i], model.embeddable.sigma);
        total += detail::log_add(l0, log_pi1 + lmix[i]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Initialization helpers
// ---------------------------------------------------------------------------

namespace detail {

struct KMeansResult {
    Eigen::VectorXd centroids;
    Eigen::VectorXd proportions;
    double pooled_std = 0.0;
};

// 1-D k-means with k-means++ seeding; empty clusters are reseeded at a random
// sample.
inline KMeansResult kmeans_1d(const Eigen::VectorXd& values, int k, int iters, rng& r) {
    const Eigen::Index n = values.size();
    KMeansResult res;
    res.centroids.resize(k);

    res.centroids[0] = values[static_cast<Eigen::Index>(r.below(static_cast<std::uint64_t>(n)))];
    Eigen::VectorXd d2 = (values.array() - res.centroids[0]).square();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        if (total <= 0.0) {
            res.centroids[c] = values[static_cast<Eigen::Index>(r.below(static_cast<std::uint64_t>(n)))];
        } else {
            double target = r.real01() * total;
            Eigen::Index pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
            res.centroids[c] = values[pick];
        }
        d2 = d2.cwiseMin((values.array() - res.centroids[c]).square().matrix());
    }

    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < iters; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::abs(values[i] - res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = std::abs(values[i] - res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums[assign[static_cast<std::size_t>(i)]] += values[i];
            counts[assign[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                res.centroids[c] = sums[c] / counts[c];
            } else {
                res.centroids[c] = values[static_cast<Eigen::Index>(r.below(static_cast<std::uint64_t>(n)))];
                changed = true;
            }
        }
        if (!changed && it > 0) break;
    }

    // order components by centroid for stable labeling
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return res.centroids[a] < res.centroids[b]; });

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = assign[static_cast<std::size_t>(i)];
        counts[c] += 1.0;
        ss += (values[i] - res.centroids[c]) * (values[i] - res.centroids[c]);
    }
    Eigen::VectorXd cent(k), prop(k);
    for (int c = 0; c < k; ++c) {
        cent[c] = res.centroids[order[static_cast<std::size_t>(c)]];
        prop[c] = counts[order[static_cast<std::size_t>(c)]] / static_cast<double>(n);
    }
    res.centroids = cent;
    res.proportions = prop;
    res.pooled_std = std::sqrt(ss / static_cast<double>(n));
    return res;
}

inline EmbeddingModel initialize_model(const RegressionData& data, const ChannelPair& pair, int J,
                                       int M, const FitConfig& cfg, rng& r) {
    EmbeddingModel model;
    model.pair = pair;
    model.J = J;
    model.uniform_component = cfg.uniform_component;
    model.pi = Eigen::Vector2d{0.5, 0.5};

    const Eigen::Index d = data.cols();
    model.embeddable.gamma.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        model.embeddable.gamma[i] = r.normal01() / static_cast<double>(d);
    }
    const double mean = data.responses.mean();
    const double var = (data.responses.array() - mean).square().sum() /
                       std::max<double>(1.0, static_cast<double>(data.rows()));
    model.embeddable.sigma = std::max(std::sqrt(var), cfg.sigma_floor);

    model.mixture.M = cfg.uniform_component ? 1 : M;
    if (cfg.uniform_component) {
        model.mixture.alphas = Eigen::VectorXd::Ones(1);
        model.mixture.mus = Eigen::VectorXd::Constant(1, 0.5);
        model.mixture.lambda = std::max(model.embeddable.sigma, cfg.lambda_floor);
    } else {
        const KMeansResult km = kmeans_1d(data.responses, M, cfg.kmeans_iters, r);
        model.mixture.mus = km.centroids;
        model.mixture.alphas = km.proportions;
        const double simplex_fix = model.mixture.alphas.sum();
        if (simplex_fix <= 0.0) {
            model.mixture.alphas = Eigen::VectorXd::Constant(M, 1.0 / M);
        } else {
            model.mixture.alphas /= simplex_fix;
        }
        model.mixture.lambda = std::max(km.pooled_std, cfg.lambda_floor);
    }
    return model;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Full fit (Algorithm: random embeddable init, k-means mixture init, EM until
// the relative log-likelihood change falls below tol; best of `restarts`).
// ---------------------------------------------------------------------------

inline EmbeddingModel fit_embedding_on_design(const RegressionData& data, const ChannelPair& pair,
                                              int J, int M, const FitConfig& cfg) {
    if (M < 1) throw argument_error("fit_embedding: M must be >= 1");
    if (data.rows() < 1) throw geometry_error("fit_embedding: empty design");

    std::optional<EmbeddingModel> best;
    std::vector<std::string> failures;
    for (int restart = 0; restart < std::max(1, cfg.restarts); ++restart) {
        rng r(mix_seed(cfg.seed, static_cast<std::uint64_t>(restart) + 1));
        EmbeddingModel model = detail::initialize_model(data, pair, J, M, cfg, r);
        try {
            double ll = observed_loglik(data, model);
            model.loglik_trace.push_back(ll);
            int iter = 0;
            while (iter < cfg.max_iter) {
                const Responsibilities resp = e_step(data, model);
                model = m_step(data, resp, model, &r, cfg.sigma_floor, cfg.lambda_floor, iter + 1);
                const double ll_new = observed_loglik(data, model);
                model.loglik_trace.push_back(ll_new);
                ++iter;
                const double rel = std::abs(ll_new - ll) /
                                   std::max(std::abs(ll), std::numeric_limits<double>::min());
                ll = ll_new;
                if (rel < cfg.tol) break;
            }
            model.iterations = iter;
            model.final_loglik = ll;
            // When no pixel embeds, gamma carries no likelihood and would be
            // returned as its random initialization; report the plain
            // least-squares embedding instead (downstream features use gamma).
            if (iter > 0 && model.pi[0] < 1e-9) {
                const NormalEquations ne =
                    accumulate_normal_equations(data, Eigen::VectorXd::Ones(data.rows()));
                GammaSolution sol = solve_gamma(ne.A, ne.Y);
                model.embeddable.gamma = std::move(sol.gamma);
                const Eigen::VectorXd residual =
                    data.responses - data.neighbors * model.embeddable.gamma;
                model.embeddable.sigma = std::max(
                    std::sqrt(residual.squaredNorm() / static_cast<double>(data.rows())),
                    cfg.sigma_floor);
                model.notes.push_back(sol.used_ridge
                                          ? "empty embeddable component; gamma from unweighted "
                                            "least squares (ridge fallback)"
                                          : "empty embeddable component; gamma from unweighted "
                                            "least squares");
                model.final_loglik = observed_loglik(data, model);
            }
            if (!best || model.final_loglik > best->final_loglik) best = std::move(model);
        } catch (const singular_system_error& e) {
            failures.push_back(e.what());
        }
    }
    if (!best) {
        std::string diag = "fit_embedding: all restarts failed (pair " + std::to_string(pair.k1) +
                           "," + std::to_string(pair.k2) + ", J=" + std::to_string(J) + ")";
        for (const auto& f : failures) diag += "; " + f;
        throw fit_failure_error(diag);
    }
    return *best;
}

inline EmbeddingModel fit_embedding(const ChannelPlane& plane_k1, const ChannelPlane& plane_k2,
                                    const ChannelPair& pair, int J, int M, const FitConfig& cfg) {
    const RegressionData data = build_design(plane_k1, plane_k2, pair, J);
    return fit_embedding_on_design(data, pair, J, M, cfg);
}

// ---------------------------------------------------------------------------
// AIC order selection
// ---------------------------------------------------------------------------

// gamma + sigma + pi (one free) + (M-1) free alphas + M means + shared lambda
inline int aic_parameter_count(Eigen::Index gamma_len, int M) {
    return static_cast<int>(gamma_len) + 2 + (M - 1) + M + 1;
}

struct AicSelection {
    int M = 0;
    EmbeddingModel model;
    std::vector<std::pair<int, double>> aic_by_M;
};

inline AicSelection select_M_by_aic(const ChannelPlane& plane_k1, const ChannelPlane& plane_k2,
                                    const ChannelPair& pair, int J,
                                    const std::vector<int>& candidates, const FitConfig& cfg) {
    if (candidates.empty()) throw argument_error("select_M_by_aic: no candidates");
    const RegressionData data = build_design(plane_k1, plane_k2, pair, J);

    AicSelection sel;
    double best_aic = std::numeric_limits<double>::infinity();
    std::vector<std::string> failures;
    std::vector<int> ms = candidates;
    std::sort(ms.begin(), ms.end()); // ties resolve to the smaller M
    for (int M : ms) {
        try {
            EmbeddingModel model = fit_embedding_on_design(data, pair, J, M, cfg);
            const double aic =
                2.0 * aic_parameter_count(data.cols(), M) - 2.0 * model.final_loglik;
            sel.aic_by_M.emplace_back(M, aic);
            if (aic < best_aic) {
                best_aic = aic;
                sel.M = M;
                sel.model = std::move(model);
            }
        } catch (const fit_failure_error& e) {
            failures.push_back(e.what());
        }
    }
    if (sel.M == 0) {
        std::string diag = "select_M_by_aic: every candidate failed";
        for (const auto& f : failures) diag += "; " + f;
        throw fit_failure_error(diag);
    }
    return sel;
}

} // namespace csid
