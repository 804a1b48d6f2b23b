// Gamut-estimation baseline: approximate per-space gamuts as occupied RGB
// histogram bins and classify an image by best occupancy overlap.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/dataset.hpp"
#include "csid/eval.hpp"
#include "csid/image.hpp"
#include "csid/image_io.hpp"

namespace csid {

struct GamutDescriptor {
    int bins_per_axis = 32;
    std::vector<std::uint32_t> occupancy; // bins^3 counts, index (r*bins + g)*bins + b
    std::string source;                   // space name or image id

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : occupancy) t += c;
        return t;
    }
    std::size_t occupied_bins() const {
        std::size_t t = 0;
        for (auto c : occupancy) t += c > 0 ? 1 : 0;
        return t;
    }
};

inline int gamut_bin(double v, int bins) {
    const int b = static_cast<int>(v * bins);
    return std::clamp(b, 0, bins - 1);
}

// `channels` are three aligned per-channel sample sequences forming triples.
inline GamutDescriptor estimate_gamut(const std::array<std::vector<double>, 3>& channels,
                                      int bins) {
    if (bins < 2) throw argument_error("estimate_gamut: bins must be >= 2");
    const std::size_t n = channels[0].size();
    if (n == 0) throw argument_error("estimate_gamut: empty sample set");
    if (channels[1].size() != n || channels[2].size() != n) {
        throw argument_error("estimate_gamut: channel sample counts differ");
    }
    GamutDescriptor g;
    g.bins_per_axis = bins;
    g.occupancy.assign(static_cast<std::size_t>(bins) * bins * bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int r = gamut_bin(channels[0][i], bins);
        const int gg = gamut_bin(channels[1][i], bins);
        const int b = gamut_bin(channels[2][i], bins);
        g.occupancy[(static_cast<std::size_t>(r) * bins + gg) * bins + b] += 1;
    }
    return g;
}

inline std::array<std::vector<double>, 3> sample_triples(const ImageRGB& img, std::size_t count,
                                                         std::uint64_t seed) {
    const auto idx = sample_positions(img.planes[0].pixel_count(), count, seed);
    std::array<std::vector<double>, 3> out;
    for (int c = 0; c < 3; ++c) {
        out[static_cast<std::size_t>(c)].resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[static_cast<std::size_t>(c)][i] = img.planes[static_cast<std::size_t>(c)].samples[idx[i]];
        }
    }
    return out;
}

inline void accumulate_gamut(GamutDescriptor& g, const std::array<std::vector<double>, 3>& channels) {
    for (std::size_t i = 0; i < channels[0].size(); ++i) {
        const int r = gamut_bin(channels[0][i], g.bins_per_axis);
        const int gg = gamut_bin(channels[1][i], g.bins_per_axis);
        const int b = gamut_bin(channels[2][i], g.bins_per_axis);
        g.occupancy[(static_cast<std::size_t>(r) * g.bins_per_axis + gg) * g.bins_per_axis + b] += 1;
    }
}

// Score = |image \cap reference| / |image| over binarized occupancy.
inline double gamut_overlap(const GamutDescriptor& image, const GamutDescriptor& reference) {
    if (image.bins_per_axis != reference.bins_per_axis) {
        throw argument_error("gamut_overlap: bin resolution mismatch");
    }
    std::size_t image_bins = 0, shared = 0;
    for (std::size_t i = 0; i < image.occupancy.size(); ++i) {
        if (image.occupancy[i] > 0) {
            ++image_bins;
            if (reference.occupancy[i] > 0) ++shared;
        }
    }
    return image_bins > 0 ? static_cast<double>(shared) / static_cast<double>(image_bins) : 0.0;
}

inline ColorSpaceId classify_by_gamut(const GamutDescriptor& img,
                                      const std::map<ColorSpaceId, GamutDescriptor>& references) {
    if (references.empty()) throw coverage_error("classify_by_gamut: no references");
    ColorSpaceId best = ColorSpaceId::AdobeRGB;
    double best_score = -1.0;
    for (ColorSpaceId id : kAllSpaces) { // fixed class order supplies the tie-break
        const auto it = references.find(id);
        if (it == references.end()) continue;
        const double score = gamut_overlap(img, it->second);
        if (score > best_score) {
            best_score = score;
            best = id;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reference building and baseline evaluation
// ---------------------------------------------------------------------------

inline std::uint64_t gamut_image_seed(std::uint64_t seed, const std::string& file) {
    return mix_seed(seed, fnv1a(file));
}

// Per-space descriptors aggregated over the manifest's training images,
// `samples_per_image` triples from each.
inline std::map<ColorSpaceId, GamutDescriptor> build_reference_gamuts(
    const std::vector<ManifestRow>& manifest, const std::string& dataset_dir, int bins,
    std::size_t samples_per_image, std::uint64_t seed) {
    std::map<ColorSpaceId, GamutDescriptor> refs;
    for (const auto& row : manifest) {
        auto [it, fresh] = refs.try_emplace(row.space);
        if (fresh) {
            it->second.bins_per_axis = bins;
            it->second.occupancy.assign(static_cast<std::size_t>(bins) * bins * bins, 0);
            it->second.source = to_string(row.space);
        }
        const ImageRGB img =
            load_image((std::filesystem::path(dataset_dir) / row.file).string());
        const std::size_t count = std::min(samples_per_image, img.planes[0].pixel_count());
        accumulate_gamut(it->second, sample_triples(img, count, gamut_image_seed(seed, row.file)));
    }
    for (ColorSpaceId id : kAllSpaces) {
        if (!refs.count(id)) {
            throw coverage_error("build_reference_gamuts: no images for space " + to_string(id));
        }
    }
    return refs;
}

// Stratified k-fold evaluation of the gamut baseline over a synthesized
// dataset; mirrors the embedding pipeline's fold assignment.
inline EvalReport evaluate_gamut_baseline(const std::vector<ManifestRow>& manifest,
                                          const std::string& dataset_dir, int bins,
                                          std::size_t samples_per_image, int k,
                                          std::uint64_t seed) {
    std::vector<ManifestRow> rows = manifest;
    std::sort(rows.begin(), rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.file < b.file; });
    std::vector<ColorSpaceId> labels;
    labels.reserve(rows.size());
    for (const auto& r : rows) labels.push_back(r.space);
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
        std::vector<ManifestRow> train;
        std::vector<ManifestRow> test;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (fold[i] == f ? test : train).push_back(rows[i]);
        }
        const auto refs = build_reference_gamuts(train, dataset_dir, bins, samples_per_image, seed);
        Eigen::MatrixXi fold_conf = Eigen::MatrixXi::Zero(confusion.rows(), confusion.cols());
        for (const auto& row : test) {
            const ImageRGB img =
                load_image((std::filesystem::path(dataset_dir) / row.file).string());
            const std::size_t count = std::min(samples_per_image, img.planes[0].pixel_count());
            const GamutDescriptor desc = estimate_gamut(
                sample_triples(img, count, gamut_image_seed(seed, row.file)), bins);
            const ColorSpaceId pred = classify_by_gamut(desc, refs);
            fold_conf(class_idx(row.space), class_idx(pred)) += 1;
        }
        confusion += fold_conf;
        fold_accuracies.push_back(accuracy(fold_conf));
    }
    return finish_report(classes, confusion, fold_accuracies);
}

// ---------------------------------------------------------------------------
// Serialization: compact binary (bins then run-length-encoded counts) plus
// JSON metadata alongside.
// ---------------------------------------------------------------------------

inline void save_gamut_binary(const GamutDescriptor& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dataset_error("cannot write '" + path + "'");
    const char magic[4] = {'G', 'M', 'T', '1'};
    out.write(magic, 4);
    const auto u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    u32(static_cast<std::uint32_t>(g.bins_per_axis));
    std::size_t i = 0;
    while (i < g.occupancy.size()) {
        std::size_t run = 1;
        while (i + run < g.occupancy.size() && g.occupancy[i + run] == g.occupancy[i] &&
               run < 0xffffffffULL) {
            ++run;
        }
        u32(g.occupancy[i]);
        u32(static_cast<std::uint32_t>(run));
        i += run;
    }

    nlohmann::json meta;
    meta["bins_per_axis"] = g.bins_per_axis;
    meta["source"] = g.source;
    meta["total"] = g.total();
    meta["occupied_bins"] = g.occupied_bins();
    std::ofstream mout(path + ".json");
    mout << meta.dump(2) << "\n";
}

inline GamutDescriptor load_gamut_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw decode_error("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "GMT1") throw decode_error("'" + path + "' is not a gamut file");
    const auto u32 = [&]() -> std::uint32_t {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    GamutDescriptor g;
    g.bins_per_axis = static_cast<int>(u32());
    const std::size_t n = static_cast<std::size_t>(g.bins_per_axis) * g.bins_per_axis * g.bins_per_axis;
    g.occupancy.reserve(n);
    while (g.occupancy.size() < n && in) {
        const std::uint32_t value = u32();
        const std::uint32_t run = u32();
        if (!in) break;
        for (std::uint32_t r = 0; r < run && g.occupancy.size() < n; ++r) g.occupancy.push_back(value);
    }
    if (g.occupancy.size() != n) throw decode_error("truncated gamut file '" + path + "'");
    std::ifstream min(path + ".json");
    if (min) {
        try {
            nlohmann::json meta;
            min >> meta;
            g.source = meta.value("source", "");
        } catch (const nlohmann::json::exception&) {
        }
    }
    return g;
}

} // namespace csid
