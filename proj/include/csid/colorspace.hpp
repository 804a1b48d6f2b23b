// RGB-family color space definitions and exact conversion between them.
//
// Each space is defined by its primaries, white point and transfer function;
// the RGB->XYZ matrix is derived from those and cached. Conversions go
// through CIE XYZ with Bradford chromatic adaptation when the white points
// differ. Out-of-gamut linear values are clipped to [0,1] before re-encoding.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "csid/common.hpp"
#include "csid/image.hpp"

namespace csid {

// Fixed alphabetical order; class indices, report rows and tie-breaks all use
// this order.
enum class ColorSpaceId { AdobeRGB = 0, AppleRGB, ColorMatchRGB, ProPhotoRGB, sRGB };

inline constexpr std::array<ColorSpaceId, 5> kAllSpaces = {
    ColorSpaceId::AdobeRGB, ColorSpaceId::AppleRGB, ColorSpaceId::ColorMatchRGB,
    ColorSpaceId::ProPhotoRGB, ColorSpaceId::sRGB};

inline const std::string& to_string(ColorSpaceId id) {
    static const std::array<std::string, 5> names = {"AdobeRGB", "AppleRGB", "ColorMatchRGB",
                                                     "ProPhotoRGB", "sRGB"};
    return names[static_cast<std::size_t>(id)];
}

inline ColorSpaceId space_from_string(const std::string& name) {
    for (ColorSpaceId id : kAllSpaces) {
        if (to_string(id) == name) return id;
    }
    throw registry_error("unknown color space '" + name + "'");
}

struct Chromaticity {
    double x = 0.0;
    double y = 0.0;
};

// Pure power curve, or a piecewise curve that is linear below a threshold in
// the linear-light domain and a power law above it.
struct TransferFunction {
    enum class Kind { power, piecewise };
    Kind kind = Kind::power;
    double exponent = 2.2;        // decode exponent (encoded -> linear)
    double linear_threshold = 0;  // linear-domain threshold of the linear segment
    double slope = 1.0;           // linear-segment slope (encoded = slope * linear)
    double offset = 0.0;          // power-segment offset (sRGB-style)

    // encoded-domain threshold of the linear segment
    double encoded_threshold() const {
        if (kind == Kind::power) return 0.0;
        return slope * linear_threshold;
    }

    double decode(double v) const {
        if (kind == Kind::power) return std::pow(v, exponent);
        if (v <= encoded_threshold()) return v / slope;
        return std::pow((v + offset) / (1.0 + offset), exponent);
    }

    double encode(double u) const {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        if (kind == Kind::power) return std::pow(u, 1.0 / exponent);
        if (u <= linear_threshold) return slope * u;
        return (1.0 + offset) * std::pow(u, 1.0 / exponent) - offset;
    }
};

struct ColorSpaceDef {
    ColorSpaceId id = ColorSpaceId::sRGB;
    std::array<Chromaticity, 3> primaries; // R, G, B
    Chromaticity white_point;
    TransferFunction transfer;
    Eigen::Matrix3d rgb_to_xyz = Eigen::Matrix3d::Zero(); // derived, cached
};

inline Eigen::Vector3d xyz_of_white(const Chromaticity& w) {
    if (w.y <= 0.0) throw geometry_error("white point with non-positive y");
    return {w.x / w.y, 1.0, (1.0 - w.x - w.y) / w.y};
}

// Columns are the primaries' XYZ vectors scaled so that (1,1,1) maps to the
// white point's XYZ with Y normalized to 1.
inline Eigen::Matrix3d derive_rgb_to_xyz(const ColorSpaceDef& def) {
    Eigen::Matrix3d P;
    for (int c = 0; c < 3; ++c) {
        const auto& p = def.primaries[static_cast<std::size_t>(c)];
        if (p.y <= 0.0) throw geometry_error("primary with non-positive y");
        P(0, c) = p.x / p.y;
        P(1, c) = 1.0;
        P(2, c) = (1.0 - p.x - p.y) / p.y;
    }
    if (std::abs(P.determinant()) < 1e-9) {
        throw geometry_error("collinear primaries give a singular geometry");
    }
    const Eigen::Vector3d scale = P.fullPivLu().solve(xyz_of_white(def.white_point));
    return P * scale.asDiagonal();
}

inline double decode_transfer(double v, const ColorSpaceDef& def) { return def.transfer.decode(v); }
inline double encode_transfer(double u, const ColorSpaceDef& def) { return def.transfer.encode(u); }

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace detail {

inline ColorSpaceDef finish(ColorSpaceDef def) {
    def.rgb_to_xyz = derive_rgb_to_xyz(def);
    return def;
}

inline std::array<ColorSpaceDef, 5> published_defs() {
    constexpr Chromaticity d65{0.3127, 0.3290};
    constexpr Chromaticity d50{0.3457, 0.3585};

    ColorSpaceDef srgb;
    srgb.id = ColorSpaceId::sRGB;
    srgb.primaries = {Chromaticity{0.64, 0.33}, {0.30, 0.60}, {0.15, 0.06}};
    srgb.white_point = d65;
    srgb.transfer = {TransferFunction::Kind::piecewise, 2.4, 0.04045 / 12.92, 12.92, 0.055};

    ColorSpaceDef adobe;
    adobe.id = ColorSpaceId::AdobeRGB;
    adobe.primaries = {Chromaticity{0.64, 0.33}, {0.21, 0.71}, {0.15, 0.06}};
    adobe.white_point = d65;
    adobe.transfer = {TransferFunction::Kind::power, 563.0 / 256.0, 0.0, 1.0, 0.0};

    ColorSpaceDef apple;
    apple.id = ColorSpaceId::AppleRGB;
    apple.primaries = {Chromaticity{0.625, 0.34}, {0.28, 0.595}, {0.155, 0.07}};
    apple.white_point = d65;
    apple.transfer = {TransferFunction::Kind::power, 1.8, 0.0, 1.0, 0.0};

    ColorSpaceDef colormatch;
    colormatch.id = ColorSpaceId::ColorMatchRGB;
    colormatch.primaries = {Chromaticity{0.630, 0.340}, {0.295, 0.605}, {0.150, 0.075}};
    colormatch.white_point = d50;
    colormatch.transfer = {TransferFunction::Kind::power, 1.8, 0.0, 1.0, 0.0};

    ColorSpaceDef prophoto;
    prophoto.id = ColorSpaceId::ProPhotoRGB;
    prophoto.primaries = {Chromaticity{0.7347, 0.2653}, {0.1596, 0.8404}, {0.0366, 0.0001}};
    prophoto.white_point = d50;
    prophoto.transfer = {TransferFunction::Kind::piecewise, 1.8, 1.0 / 512.0, 16.0, 0.0};

    return {finish(adobe), finish(apple), finish(colormatch), finish(prophoto), finish(srgb)};
}

} // namespace detail

// Immutable after construction; conversions only read from it.
class ColorSpaceRegistry {
public:
    ColorSpaceRegistry() : defs_(detail::published_defs()) {}

    const ColorSpaceDef& get(ColorSpaceId id) const {
        return defs_[static_cast<std::size_t>(id)];
    }

    void override_def(const ColorSpaceDef& def) {
        defs_[static_cast<std::size_t>(def.id)] = detail::finish(def);
    }

    static const ColorSpaceRegistry& builtin() {
        static const ColorSpaceRegistry reg;
        return reg;
    }

private:
    std::array<ColorSpaceDef, 5> defs_;
};

// ---------------------------------------------------------------------------
// Conversion plans
// ---------------------------------------------------------------------------

struct ConversionPlan {
    ColorSpaceId source = ColorSpaceId::sRGB;
    ColorSpaceId target = ColorSpaceId::sRGB;
    Eigen::Matrix3d adapted_matrix = Eigen::Matrix3d::Identity(); // source linear -> target linear
};

inline Eigen::Matrix3d bradford_adaptation(const Eigen::Vector3d& white_src,
                                           const Eigen::Vector3d& white_dst) {
    static const Eigen::Matrix3d bfd = (Eigen::Matrix3d() << 0.8951, 0.2664, -0.1614,
                                        -0.7502, 1.7135, 0.0367,
                                        0.0389, -0.0685, 1.0296)
                                           .finished();
    if ((white_src - white_dst).cwiseAbs().maxCoeff() < 1e-9) {
        return Eigen::Matrix3d::Identity();
    }
    const Eigen::Vector3d cone_src = bfd * white_src;
    const Eigen::Vector3d cone_dst = bfd * white_dst;
    const Eigen::Vector3d gain = cone_dst.cwiseQuotient(cone_src);
    return bfd.inverse() * gain.asDiagonal() * bfd;
}

inline ConversionPlan plan_conversion(ColorSpaceId src, ColorSpaceId dst,
                                      const ColorSpaceRegistry& reg = ColorSpaceRegistry::builtin()) {
    const ColorSpaceDef& s = reg.get(src);
    const ColorSpaceDef& d = reg.get(dst);
    ConversionPlan plan;
    plan.source = src;
    plan.target = dst;
    if (src == dst) {
        plan.adapted_matrix = Eigen::Matrix3d::Identity();
        return plan;
    }
    const Eigen::Matrix3d adapt =
        bradford_adaptation(xyz_of_white(s.white_point), xyz_of_white(d.white_point));
    plan.adapted_matrix = d.rgb_to_xyz.inverse() * adapt * s.rgb_to_xyz;
    return plan;
}

// decode -> matrix -> clip -> encode, per pixel. The identity plan is a
// pass-through so re-encoding a file in its own space is bit-stable.
inline ImageRGB convert_image(const ImageRGB& img, const ConversionPlan& plan,
                              const ColorSpaceRegistry& reg = ColorSpaceRegistry::builtin()) {
    if (img.space_tag && *img.space_tag != plan.source) {
        throw labeling_error("convert_image: image tagged " + to_string(*img.space_tag) +
                             " but plan source is " + to_string(plan.source));
    }
    ImageRGB out = img;
    out.space_tag = plan.target;
    if (plan.source == plan.target) return out;

    const TransferFunction& tf_src = reg.get(plan.source).transfer;
    const TransferFunction& tf_dst = reg.get(plan.target).transfer;
    const Eigen::Matrix3d& m = plan.adapted_matrix;
    const std::size_t n = img.planes[0].samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d lin_src{tf_src.decode(img.planes[0].samples[i]),
                                      tf_src.decode(img.planes[1].samples[i]),
                                      tf_src.decode(img.planes[2].samples[i])};
        Eigen::Vector3d lin_dst = m * lin_src;
        for (int c = 0; c < 3; ++c) {
            const double clipped = std::clamp(lin_dst[c], 0.0, 1.0);
            out.planes[static_cast<std::size_t>(c)].samples[i] = tf_dst.encode(clipped);
        }
    }
    return out;
}

} // namespace csid
