// Per-image feature vectors assembled from fitted embedding models, the
// per-coordinate standardizer, and the JSON-lines feature store.

#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/embedding.hpp"
#include "csid/image.hpp"

namespace csid {

enum class FeatureMode { intra, inter, concat };

inline const std::string& to_string(FeatureMode mode) {
    static const std::array<std::string, 3> names = {"intra", "inter", "concat"};
    return names[static_cast<std::size_t>(mode)];
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "intra") return FeatureMode::intra;
    if (s == "inter") return FeatureMode::inter;
    if (s == "concat") return FeatureMode::concat;
    throw argument_error("unknown feature mode '" + s + "'");
}

inline int intra_feature_length(int J) { return 3 * ((2 * J + 1) * (2 * J + 1) - 1); }
inline int inter_feature_length(int J) { return 6 * (2 * J + 1) * (2 * J + 1); }

inline int feature_length(FeatureMode mode, int J) {
    switch (mode) {
        case FeatureMode::intra: return intra_feature_length(J);
        case FeatureMode::inter: return inter_feature_length(J);
        case FeatureMode::concat: return intra_feature_length(J) + inter_feature_length(J);
    }
    return 0;
}

struct FeatureVector {
    Eigen::VectorXd values;
    std::optional<ColorSpaceId> label;
    std::string image_id;
    FeatureMode mode = FeatureMode::intra;
    int J = 2;
};

// The three intra pairs in channel order, then the six ordered inter pairs in
// lexicographic order.
inline std::vector<ChannelPair> pairs_for_mode(FeatureMode mode) {
    std::vector<ChannelPair> pairs;
    if (mode == FeatureMode::intra || mode == FeatureMode::concat) {
        for (int k = 0; k < 3; ++k) pairs.push_back({k, k});
    }
    if (mode == FeatureMode::inter || mode == FeatureMode::concat) {
        for (int k1 = 0; k1 < 3; ++k1) {
            for (int k2 = 0; k2 < 3; ++k2) {
                if (k1 != k2) pairs.push_back({k1, k2});
            }
        }
    }
    return pairs;
}

struct FeatureConfig {
    FitConfig fit;
    std::vector<int> M_candidates = {2, 4, 6, 8};
};

// Per-(image, pair) fit seed: independent of extraction order.
inline std::uint64_t pair_fit_seed(std::uint64_t base_seed, const std::string& image_id,
                                   const ChannelPair& pair, int J) {
    const std::uint64_t h = fnv1a(image_id);
    return mix_seed(mix_seed(base_seed, h),
                    static_cast<std::uint64_t>(pair.k1 * 16 + pair.k2 * 4 + J));
}

inline FeatureVector extract_features(const ImageRGB& img, const std::string& image_id,
                                      FeatureMode mode, int J, const FeatureConfig& cfg) {
    const auto pairs = pairs_for_mode(mode);
    FeatureVector out;
    out.image_id = image_id;
    out.mode = mode;
    out.J = J;
    out.label = img.space_tag;
    out.values.resize(feature_length(mode, J));

    Eigen::Index offset = 0;
    for (const auto& pair : pairs) {
        FitConfig fit = cfg.fit;
        fit.seed = pair_fit_seed(cfg.fit.seed, image_id, pair, J);
        try {
            const ChannelPlane& p1 = img.planes[static_cast<std::size_t>(pair.k1)];
            const ChannelPlane& p2 = img.planes[static_cast<std::size_t>(pair.k2)];
            const AicSelection sel = select_M_by_aic(p1, p2, pair, J, cfg.M_candidates, fit);
            out.values.segment(offset, sel.model.embeddable.gamma.size()) =
                sel.model.embeddable.gamma;
            offset += sel.model.embeddable.gamma.size();
        } catch (const error& e) {
            throw fit_failure_error("feature extraction failed for pair (" +
                                    std::to_string(pair.k1) + "," + std::to_string(pair.k2) +
                                    ") of '" + image_id + "': " + e.what());
        }
    }
    return out;
}

inline FeatureVector intra_features(const ImageRGB& img, const std::string& image_id, int J,
                                    const FeatureConfig& cfg) {
    return extract_features(img, image_id, FeatureMode::intra, J, cfg);
}

inline FeatureVector inter_features(const ImageRGB& img, const std::string& image_id, int J,
                                    const FeatureConfig& cfg) {
    return extract_features(img, image_id, FeatureMode::inter, J, cfg);
}

// ---------------------------------------------------------------------------
// Standardizer (fit on the training fold, applied before GDA)
// ---------------------------------------------------------------------------

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale; // standard deviation, zero replaced by 1

    static Standardizer fit(const std::vector<Eigen::VectorXd>& rows) {
        if (rows.empty()) throw argument_error("Standardizer::fit: no rows");
        const Eigen::Index d = rows.front().size();
        Standardizer s;
        s.mean = Eigen::VectorXd::Zero(d);
        for (const auto& r : rows) s.mean += r;
        s.mean /= static_cast<double>(rows.size());
        Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
        for (const auto& r : rows) var += (r - s.mean).cwiseAbs2();
        var /= static_cast<double>(rows.size());
        s.scale = var.cwiseSqrt();
        for (Eigen::Index i = 0; i < d; ++i) {
            if (s.scale[i] < 1e-15) s.scale[i] = 1.0;
        }
        return s;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        if (v.size() != mean.size()) throw argument_error("Standardizer: dimension mismatch");
        return (v - mean).cwiseQuotient(scale);
    }
};

// ---------------------------------------------------------------------------
// Feature store: JSON lines {image_id, mode, J, seed, label, values[]}
// ---------------------------------------------------------------------------

struct FeatureStoreRow {
    FeatureVector feature;
    std::uint64_t seed = 0;
};

inline nlohmann::json feature_row_to_json(const FeatureStoreRow& row) {
    nlohmann::json j;
    j["image_id"] = row.feature.image_id;
    j["mode"] = to_string(row.feature.mode);
    j["J"] = row.feature.J;
    j["seed"] = row.seed;
    j["label"] = row.feature.label ? nlohmann::json(to_string(*row.feature.label))
                                   : nlohmann::json(nullptr);
    j["values"] = std::vector<double>(row.feature.values.begin(), row.feature.values.end());
    return j;
}

inline FeatureStoreRow feature_row_from_json(const nlohmann::json& j) {
    FeatureStoreRow row;
    row.feature.image_id = j.at("image_id").get<std::string>();
    row.feature.mode = feature_mode_from_string(j.at("mode").get<std::string>());
    row.feature.J = j.at("J").get<int>();
    row.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("label") && !j.at("label").is_null()) {
        row.feature.label = space_from_string(j.at("label").get<std::string>());
    }
    const auto vals = j.at("values").get<std::vector<double>>();
    row.feature.values = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                           static_cast<Eigen::Index>(vals.size()));
    return row;
}

// Malformed lines (for example a torn final line after an interrupted run)
// are skipped so that extraction can resume.
inline std::vector<FeatureStoreRow> load_feature_store(const std::string& path) {
    std::vector<FeatureStoreRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            rows.push_back(feature_row_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception&) {
            continue;
        }
    }
    return rows;
}

inline void append_feature_row(std::ofstream& out, const FeatureStoreRow& row) {
    out << feature_row_to_json(row).dump() << "\n";
    out.flush();
}

} // namespace csid
