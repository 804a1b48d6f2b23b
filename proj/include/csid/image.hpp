// Float channel planes, RGB images, channel pairs and pixel sampling.
//
// Intensities are unit-interval doubles throughout; quantization back to
// integer codes happens only when a file is written.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "csid/common.hpp"
#include "csid/rng.hpp"

namespace csid {

enum class ColorSpaceId; // colorspace.hpp

struct ChannelPlane {
    int width = 0;
    int height = 0;
    std::vector<double> samples; // row-major, samples.size() == width*height

    double at(int row, int col) const { return samples[static_cast<std::size_t>(row) * width + col]; }
    double& at(int row, int col) { return samples[static_cast<std::size_t>(row) * width + col]; }
    std::size_t pixel_count() const { return samples.size(); }

    static ChannelPlane constant(int width, int height, double value) {
        ChannelPlane p;
        p.width = width;
        p.height = height;
        p.samples.assign(static_cast<std::size_t>(width) * height, value);
        return p;
    }
};

struct ImageRGB {
    int width = 0;
    int height = 0;
    std::array<ChannelPlane, 3> planes; // C1, C2, C3
    std::optional<ColorSpaceId> space_tag;

    double mean() const {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& p : planes) {
            for (double v : p.samples) s += v;
            n += p.samples.size();
        }
        return n ? s / static_cast<double>(n) : 0.0;
    }
};

// Channel pair (k1, k2): k1 indexes the response plane, k2 the neighbor plane.
struct ChannelPair {
    int k1 = 0;
    int k2 = 0;

    bool intra() const { return k1 == k2; }
    bool operator==(const ChannelPair&) const = default;
};

// Square neighborhood of radius J swept row-major from the top-left corner;
// the center position is excluded in intra mode and kept in inter mode.
struct NeighborhoodSpec {
    int J = 1;
    int neighbor_count(bool intra) const {
        const int full = (2 * J + 1) * (2 * J + 1);
        return intra ? full - 1 : full;
    }
};

inline ImageRGB make_image(int width, int height, std::optional<ColorSpaceId> tag = std::nullopt) {
    ImageRGB img;
    img.width = width;
    img.height = height;
    for (auto& p : img.planes) p = ChannelPlane::constant(width, height, 0.0);
    img.space_tag = tag;
    return img;
}

inline ChannelPlane extract_channel(const ImageRGB& img, int k) {
    if (k < 0 || k > 2) {
        throw argument_error("extract_channel: channel index " + std::to_string(k) + " out of range");
    }
    return img.planes[static_cast<std::size_t>(k)];
}

// Positions of a uniform sample without replacement; depends only on
// (width*height, count, seed), so the same seed aligns positions across the
// three planes of one image.
inline std::vector<std::size_t> sample_positions(std::size_t pixel_count, std::size_t count,
                                                 std::uint64_t seed) {
    if (count > pixel_count) {
        throw argument_error("sample_positions: count " + std::to_string(count) +
                             " exceeds pixel count " + std::to_string(pixel_count));
    }
    rng r(seed);
    return r.sample_indices(pixel_count, count);
}

inline std::vector<double> sample_pixels(const ChannelPlane& plane, std::size_t count,
                                         std::uint64_t seed) {
    const auto idx = sample_positions(plane.pixel_count(), count, seed);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = plane.samples[idx[i]];
    return out;
}

} // namespace csid
