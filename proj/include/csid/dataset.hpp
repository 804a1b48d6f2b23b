// Labeled corpus synthesis: every source image is converted into all five
// spaces and written as 16-bit PNG, with a JSON-lines manifest and a sidecar
// label map alongside.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/image_io.hpp"

namespace csid {

struct ManifestRow {
    std::string file;  // name relative to the dataset directory
    ColorSpaceId space;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

inline void write_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw dataset_error("cannot write '" + tmp + "'");
        for (const auto& row : rows) {
            nlohmann::json j;
            j["file"] = row.file;
            j["space"] = to_string(row.space);
            out << j.dump() << "\n";
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<ManifestRow> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dataset_error("cannot open manifest '" + path + "'");
    std::vector<ManifestRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        rows.push_back({j.at("file").get<std::string>(),
                        space_from_string(j.at("space").get<std::string>())});
    }
    return rows;
}

inline bool is_image_file(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM";
}

inline std::vector<std::filesystem::path> list_images_sorted(const std::string& dir) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Converts each source image into the five spaces. Returns the manifest rows
// (also written to out_dir/manifest.jsonl together with the sidecar labels).
inline std::vector<ManifestRow> build_dataset(const std::string& src_dir, const std::string& out_dir,
                                              ColorSpaceId source_space,
                                              const ColorSpaceRegistry& reg = ColorSpaceRegistry::builtin()) {
    const auto files = list_images_sorted(src_dir);
    if (files.empty()) throw dataset_error("dataset error: no decodable images in '" + src_dir + "'");
    std::filesystem::create_directories(out_dir);

    std::vector<ManifestRow> rows;
    nlohmann::json sidecar = nlohmann::json::object();
    for (const auto& file : files) {
        ImageRGB img = load_image(file.string());
        if (img.space_tag && *img.space_tag != source_space) {
            throw labeling_error("'" + file.string() + "' is tagged " + to_string(*img.space_tag) +
                                 ", expected " + to_string(source_space));
        }
        img.space_tag = source_space;
        const std::string stem = file.stem().string();
        for (ColorSpaceId target : kAllSpaces) {
            const ConversionPlan plan = plan_conversion(source_space, target, reg);
            const ImageRGB converted = convert_image(img, plan, reg);
            const std::string name = stem + "__" + to_string(target) + ".png";
            save_png16(converted, (std::filesystem::path(out_dir) / name).string());
            rows.push_back({name, target});
            sidecar[name] = to_string(target);
        }
    }
    write_manifest(rows, (std::filesystem::path(out_dir) / kManifestName).string());
    {
        const auto sidecar_path = std::filesystem::path(out_dir) / kSidecarName;
        const std::string tmp = sidecar_path.string() + ".tmp";
        std::ofstream out(tmp);
        out << sidecar.dump(2) << "\n";
        out.close();
        std::filesystem::rename(tmp, sidecar_path);
    }
    return rows;
}

} // namespace csid
