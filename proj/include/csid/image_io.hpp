// Image ingestion and emission: PNG (8/16-bit RGB via libpng), binary PPM
// (P6), and the per-directory sidecar label manifest.
//
// Integer codes are mapped to [0,1] by dividing by the code maximum; writes
// quantize with round-to-nearest.

#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/image.hpp"

namespace csid {

inline constexpr const char* kSidecarName = "labels.json";

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline bool has_png_signature(std::FILE* f) {
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f) != 8) return false;
    std::rewind(f);
    return png_sig_cmp(sig, 0, 8) == 0;
}

// Raw interleaved RGB samples plus bit depth; shared by the PNG and PPM paths.
struct RawRgb {
    int width = 0;
    int height = 0;
    int bit_depth = 8; // 8 or 16
    std::vector<std::uint16_t> samples; // interleaved RGB, host order
};

inline ImageRGB planes_from_raw(const RawRgb& raw) {
    ImageRGB img = make_image(raw.width, raw.height);
    const double maxcode = raw.bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            img.planes[static_cast<std::size_t>(c)].samples[i] =
                static_cast<double>(raw.samples[3 * i + static_cast<std::size_t>(c)]) / maxcode;
        }
    }
    return img;
}

inline RawRgb read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw decode_error("cannot open '" + path + "'");
    if (!has_png_signature(f.get())) throw decode_error("'" + path + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw decode_error("libpng initialization failed");
    }
    std::vector<png_byte> data;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw decode_error("libpng failed to decode '" + path + "'");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA ||
        color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw format_error("'" + path + "' is not an RGB raster");
    }
    png_read_update_info(png, info);

    RawRgb raw;
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    const std::size_t bytes_per_sample = raw.bit_depth == 16 ? 2 : 1;
    if (rowbytes != static_cast<std::size_t>(raw.width) * 3 * bytes_per_sample) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw format_error("'" + path + "' is not an RGB raster");
    }
    data.resize(rowbytes * static_cast<std::size_t>(raw.height));
    rows.resize(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * 3;
    raw.samples.resize(n);
    if (raw.bit_depth == 16) {
        // PNG stores 16-bit samples big-endian
        for (std::size_t i = 0; i < n; ++i) {
            raw.samples[i] = static_cast<std::uint16_t>((data[2 * i] << 8) | data[2 * i + 1]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) raw.samples[i] = data[i];
    }
    return raw;
}

inline int ppm_next_value(std::istream& in) {
    // skip whitespace and '#' comments between header tokens
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw decode_error("malformed PPM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    if (c != EOF) in.unget();
    return value;
}

inline RawRgb read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw decode_error("cannot open '" + path + "'");
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '6') {
        throw format_error("'" + path + "' is not a binary PPM (P6) file");
    }
    RawRgb raw;
    raw.width = ppm_next_value(in);
    raw.height = ppm_next_value(in);
    const int maxval = ppm_next_value(in);
    in.get(); // single whitespace before raster data
    if (raw.width <= 0 || raw.height <= 0 || maxval <= 0 || maxval > 65535) {
        throw decode_error("malformed PPM header in '" + path + "'");
    }
    if (maxval != 255 && maxval != 65535) {
        throw format_error("PPM maxval " + std::to_string(maxval) + " unsupported (use 255 or 65535)");
    }
    raw.bit_depth = maxval == 65535 ? 16 : 8;
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * 3;
    raw.samples.resize(n);
    if (raw.bit_depth == 16) {
        std::vector<unsigned char> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
            throw decode_error("truncated PPM raster in '" + path + "'");
        }
        for (std::size_t i = 0; i < n; ++i) {
            raw.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        }
    } else {
        std::vector<unsigned char> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
            throw decode_error("truncated PPM raster in '" + path + "'");
        }
        for (std::size_t i = 0; i < n; ++i) raw.samples[i] = buf[i];
    }
    return raw;
}

} // namespace detail

// Sidecar manifest: one JSON object per directory mapping file name -> label.
inline std::optional<ColorSpaceId> sidecar_label(const std::filesystem::path& image_path) {
    const auto sidecar = image_path.parent_path() / kSidecarName;
    std::ifstream in(sidecar);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    const auto it = j.find(image_path.filename().string());
    if (it == j.end() || !it->is_string()) return std::nullopt;
    try {
        return space_from_string(it->get<std::string>());
    } catch (const registry_error&) {
        return std::nullopt;
    }
}

inline ImageRGB load_image(const std::string& path) {
    std::FILE* probe = std::fopen(path.c_str(), "rb");
    if (!probe) throw decode_error("cannot open '" + path + "'");
    const bool is_png = detail::has_png_signature(probe);
    std::fclose(probe);

    detail::RawRgb raw = is_png ? detail::read_png(path) : detail::read_ppm(path);
    ImageRGB img = detail::planes_from_raw(raw);
    img.space_tag = sidecar_label(path);
    return img;
}

inline void save_png16(const ImageRGB& img, const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw dataset_error("cannot write '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw dataset_error("libpng initialization failed");
    }
    std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 6);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw dataset_error("libpng failed to encode '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.planes[static_cast<std::size_t>(c)].at(y, x);
                const auto code = static_cast<std::uint16_t>(
                    std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
                row[static_cast<std::size_t>(6 * x + 2 * c)] = static_cast<png_byte>(code >> 8);
                row[static_cast<std::size_t>(6 * x + 2 * c + 1)] = static_cast<png_byte>(code & 0xff);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void save_ppm(const ImageRGB& img, const std::string& path, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) throw argument_error("save_ppm: bit depth must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dataset_error("cannot write '" + path + "'");
    const int maxval = bit_depth == 16 ? 65535 : 255;
    out << "P6\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.planes[static_cast<std::size_t>(c)].at(y, x);
                const long code = std::lround(std::clamp(v, 0.0, 1.0) * maxval);
                if (bit_depth == 16) {
                    out.put(static_cast<char>((code >> 8) & 0xff));
                    out.put(static_cast<char>(code & 0xff));
                } else {
                    out.put(static_cast<char>(code & 0xff));
                }
            }
        }
    }
    if (!out) throw dataset_error("short write to '" + path + "'");
}

} // namespace csid
