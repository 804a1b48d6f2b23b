// Pipeline configuration, JSON loading and the config fingerprint embedded
// in emitted artifacts.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/embedding.hpp"
#include "csid/eval.hpp"
#include "csid/features.hpp"
#include "csid/rng.hpp"

namespace csid {

struct PipelineConfig {
    int J = 2;
    FeatureMode mode = FeatureMode::intra;
    std::vector<int> M_candidates = {2, 4, 6, 8};
    int folds = 5;
    std::uint64_t seed = 20240901;
    int jobs = 0; // 0 = hardware concurrency

    struct Paths {
        std::string corpus;   // source images
        std::string dataset;  // synthesized corpus (manifest.jsonl lives here)
        std::string store;    // feature store (JSON lines)
        std::string bundle;   // trained model bundle
        std::string report;   // report path prefix
    } paths;

    ColorSpaceId source_space = ColorSpaceId::sRGB;
    FitConfig fit;
    PipelineCfg pipeline; // GDA + MLR settings
    struct Baseline {
        int bins = 32;
        std::size_t samples_per_image = 5000;
    } baseline;

    nlohmann::json space_overrides = nlohmann::json::object();

    void validate() const {
        if (J < 1 || J > 3) throw argument_error("config: J must be in {1,2,3}");
        if (folds < 2) throw argument_error("config: folds must be >= 2");
        if (M_candidates.empty()) throw argument_error("config: M_candidates must be non-empty");
    }
};

namespace detail {

inline TransferFunction transfer_from_json(const nlohmann::json& j) {
    TransferFunction tf;
    const std::string type = j.at("type").get<std::string>();
    if (type == "power") {
        tf.kind = TransferFunction::Kind::power;
        tf.exponent = j.at("exponent").get<double>();
    } else if (type == "piecewise") {
        tf.kind = TransferFunction::Kind::piecewise;
        tf.exponent = j.at("exponent").get<double>();
        tf.linear_threshold = j.at("linear_threshold").get<double>();
        tf.slope = j.at("slope").get<double>();
        tf.offset = j.value("offset", 0.0);
    } else {
        throw argument_error("config: unknown transfer type '" + type + "'");
    }
    return tf;
}

} // namespace detail

// Registry with any per-space overrides from the config applied.
inline ColorSpaceRegistry registry_from_config(const PipelineConfig& cfg) {
    ColorSpaceRegistry reg;
    for (const auto& [name, spec] : cfg.space_overrides.items()) {
        const ColorSpaceId id = space_from_string(name);
        ColorSpaceDef def = reg.get(id);
        if (spec.contains("primaries")) {
            const auto prim = spec.at("primaries").get<std::vector<std::vector<double>>>();
            if (prim.size() != 3) throw argument_error("config: need exactly 3 primaries");
            for (int c = 0; c < 3; ++c) {
                def.primaries[static_cast<std::size_t>(c)] = {prim[static_cast<std::size_t>(c)].at(0),
                                                              prim[static_cast<std::size_t>(c)].at(1)};
            }
        }
        if (spec.contains("white")) {
            const auto w = spec.at("white").get<std::vector<double>>();
            def.white_point = {w.at(0), w.at(1)};
        }
        if (spec.contains("transfer")) def.transfer = detail::transfer_from_json(spec.at("transfer"));
        reg.override_def(def);
    }
    return reg;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.J = j.value("J", cfg.J);
    if (j.contains("mode")) cfg.mode = feature_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("M_candidates")) cfg.M_candidates = j.at("M_candidates").get<std::vector<int>>();
    cfg.folds = j.value("folds", cfg.folds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        cfg.paths.corpus = p.value("corpus", "");
        cfg.paths.dataset = p.value("dataset", "");
        cfg.paths.store = p.value("store", "");
        cfg.paths.bundle = p.value("bundle", "");
        cfg.paths.report = p.value("report", "");
    }
    if (j.contains("source_space")) {
        cfg.source_space = space_from_string(j.at("source_space").get<std::string>());
    }
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        cfg.fit.tol = f.value("tol", cfg.fit.tol);
        cfg.fit.max_iter = f.value("max_iter", cfg.fit.max_iter);
        cfg.fit.restarts = f.value("restarts", cfg.fit.restarts);
        cfg.fit.sigma_floor = f.value("sigma_floor", cfg.fit.sigma_floor);
        cfg.fit.lambda_floor = f.value("lambda_floor", cfg.fit.lambda_floor);
        cfg.fit.kmeans_iters = f.value("kmeans_iters", cfg.fit.kmeans_iters);
        cfg.fit.uniform_component = f.value("uniform_component", cfg.fit.uniform_component);
    }
    if (j.contains("gda")) {
        const auto& g = j.at("gda");
        cfg.pipeline.use_gda = g.value("enabled", true);
        const std::string kernel = g.value("kernel", std::string("rbf"));
        cfg.pipeline.kernel.kind =
            kernel == "linear" ? KernelDesc::Kind::linear : KernelDesc::Kind::rbf;
        cfg.pipeline.kernel.bandwidth = g.value("bandwidth", 0.0);
        cfg.pipeline.gda_out_dim = g.value("out_dim", 4);
    }
    if (j.contains("mlr")) {
        const auto& m = j.at("mlr");
        cfg.pipeline.mlr.l2 = m.value("l2", cfg.pipeline.mlr.l2);
        cfg.pipeline.mlr.max_iter = m.value("max_iter", cfg.pipeline.mlr.max_iter);
        cfg.pipeline.mlr.grad_tol = m.value("grad_tol", cfg.pipeline.mlr.grad_tol);
        if (m.contains("l2_grid")) cfg.pipeline.l2_grid = m.at("l2_grid").get<std::vector<double>>();
    }
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        cfg.baseline.bins = b.value("bins", cfg.baseline.bins);
        cfg.baseline.samples_per_image =
            b.value("samples_per_image", cfg.baseline.samples_per_image);
    }
    if (j.contains("spaces")) cfg.space_overrides = j.at("spaces");
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw argument_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw argument_error("config parse error in '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

// Fingerprint over every setting that changes extracted feature values; a
// bundle built under one fingerprint refuses features from another.
inline std::string config_fingerprint(const PipelineConfig& cfg) {
    std::ostringstream s;
    s << cfg.J << "|" << to_string(cfg.mode) << "|" << cfg.seed << "|";
    for (int m : cfg.M_candidates) s << m << ",";
    s << "|" << cfg.fit.tol << "|" << cfg.fit.max_iter << "|" << cfg.fit.restarts << "|"
      << cfg.fit.sigma_floor << "|" << cfg.fit.lambda_floor << "|" << cfg.fit.kmeans_iters << "|"
      << cfg.fit.uniform_component;
    std::ostringstream hex;
    hex << std::hex << fnv1a(s.str());
    return hex.str();
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["J"] = cfg.J;
    j["mode"] = to_string(cfg.mode);
    j["M_candidates"] = cfg.M_candidates;
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["paths"] = {{"corpus", cfg.paths.corpus},
                  {"dataset", cfg.paths.dataset},
                  {"store", cfg.paths.store},
                  {"bundle", cfg.paths.bundle},
                  {"report", cfg.paths.report}};
    j["source_space"] = to_string(cfg.source_space);
    j["fit"] = {{"tol", cfg.fit.tol},
                {"max_iter", cfg.fit.max_iter},
                {"restarts", cfg.fit.restarts},
                {"sigma_floor", cfg.fit.sigma_floor},
                {"lambda_floor", cfg.fit.lambda_floor},
                {"kmeans_iters", cfg.fit.kmeans_iters},
                {"uniform_component", cfg.fit.uniform_component}};
    j["gda"] = {{"enabled", cfg.pipeline.use_gda},
                {"kernel", cfg.pipeline.kernel.kind == KernelDesc::Kind::rbf ? "rbf" : "linear"},
                {"bandwidth", cfg.pipeline.kernel.bandwidth},
                {"out_dim", cfg.pipeline.gda_out_dim}};
    j["mlr"] = {{"l2", cfg.pipeline.mlr.l2},
                {"max_iter", cfg.pipeline.mlr.max_iter},
                {"grad_tol", cfg.pipeline.mlr.grad_tol},
                {"l2_grid", cfg.pipeline.l2_grid}};
    j["baseline"] = {{"bins", cfg.baseline.bins},
                     {"samples_per_image", cfg.baseline.samples_per_image}};
    j["spaces"] = cfg.space_overrides;
    return j;
}

} // namespace csid
