// Versioned JSON serialization of fitted models and the trained pipeline
// bundle (standardizer + GDA + MLR + config fingerprint).

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "csid/config.hpp"
#include "csid/embedding.hpp"
#include "csid/eval.hpp"
#include "csid/gda.hpp"
#include "csid/mlr.hpp"

namespace csid {

inline nlohmann::json embedding_to_json(const EmbeddingModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["pair"] = {m.pair.k1, m.pair.k2};
    j["J"] = m.J;
    j["pi"] = {m.pi[0], m.pi[1]};
    j["gamma"] = std::vector<double>(m.embeddable.gamma.begin(), m.embeddable.gamma.end());
    j["sigma"] = m.embeddable.sigma;
    j["mixture"] = {{"M", m.mixture.M},
                    {"alphas", std::vector<double>(m.mixture.alphas.begin(), m.mixture.alphas.end())},
                    {"mus", std::vector<double>(m.mixture.mus.begin(), m.mixture.mus.end())},
                    {"lambda", m.mixture.lambda}};
    j["uniform_component"] = m.uniform_component;
    j["final_loglik"] = m.final_loglik;
    j["iterations"] = m.iterations;
    j["notes"] = m.notes;
    return j;
}

inline EmbeddingModel embedding_from_json(const nlohmann::json& j) {
    EmbeddingModel m;
    m.pair = {j.at("pair").at(0).get<int>(), j.at("pair").at(1).get<int>()};
    m.J = j.at("J").get<int>();
    m.pi = {j.at("pi").at(0).get<double>(), j.at("pi").at(1).get<double>()};
    const auto gamma = j.at("gamma").get<std::vector<double>>();
    m.embeddable.gamma =
        Eigen::Map<const Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
    m.embeddable.sigma = j.at("sigma").get<double>();
    const auto& mix = j.at("mixture");
    m.mixture.M = mix.at("M").get<int>();
    const auto alphas = mix.at("alphas").get<std::vector<double>>();
    m.mixture.alphas =
        Eigen::Map<const Eigen::VectorXd>(alphas.data(), static_cast<Eigen::Index>(alphas.size()));
    const auto mus = mix.at("mus").get<std::vector<double>>();
    m.mixture.mus =
        Eigen::Map<const Eigen::VectorXd>(mus.data(), static_cast<Eigen::Index>(mus.size()));
    m.mixture.lambda = mix.at("lambda").get<double>();
    m.uniform_component = j.value("uniform_component", false);
    m.final_loglik = j.at("final_loglik").get<double>();
    m.iterations = j.at("iterations").get<int>();
    if (j.contains("notes")) m.notes = j.at("notes").get<std::vector<std::string>>();
    return m;
}

struct ModelBundle {
    std::string fingerprint;
    PipelineConfig config;
    PipelineModel pipeline;
};

inline void save_bundle(const ModelBundle& bundle, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["fingerprint"] = bundle.fingerprint;
    j["config"] = config_to_json(bundle.config);
    j["standardizer"] = {
        {"mean", std::vector<double>(bundle.pipeline.standardizer.mean.begin(),
                                     bundle.pipeline.standardizer.mean.end())},
        {"scale", std::vector<double>(bundle.pipeline.standardizer.scale.begin(),
                                      bundle.pipeline.standardizer.scale.end())}};
    j["gda"] = bundle.pipeline.gda ? gda_to_json(*bundle.pipeline.gda) : nlohmann::json(nullptr);
    j["mlr"] = mlr_to_json(bundle.pipeline.mlr);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw dataset_error("cannot write '" + tmp + "'");
        out << j.dump() << "\n";
    }
    std::filesystem::rename(tmp, path);
}

inline ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bundle_mismatch_error("cannot open bundle '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw bundle_mismatch_error("bundle parse error: " + std::string(e.what()));
    }
    ModelBundle bundle;
    bundle.fingerprint = j.at("fingerprint").get<std::string>();
    bundle.config = config_from_json(j.at("config"));
    const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    const auto scale = j.at("standardizer").at("scale").get<std::vector<double>>();
    bundle.pipeline.standardizer.mean =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    bundle.pipeline.standardizer.scale =
        Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    if (!j.at("gda").is_null()) bundle.pipeline.gda = gda_from_json(j.at("gda"));
    bundle.pipeline.mlr = mlr_from_json(j.at("mlr"));

    // the stored fingerprint must match the stored config; anything else
    // means the bundle was edited or mixed from two runs
    if (config_fingerprint(bundle.config) != bundle.fingerprint) {
        throw bundle_mismatch_error("bundle fingerprint does not match its stored config");
    }
    return bundle;
}

} // namespace csid
