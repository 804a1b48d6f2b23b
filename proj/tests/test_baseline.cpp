#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "csid/gamut.hpp"
#include "support/test_util.hpp"

using namespace csid;

TEST_CASE("estimate_gamut bins single pixels into corners") {
    const std::array<std::vector<double>, 3> black = {{{0.0}, {0.0}, {0.0}}};
    const GamutDescriptor g = estimate_gamut(black, 8);
    CHECK(g.occupancy[0] == 1);
    CHECK(g.occupied_bins() == 1);
    CHECK(g.total() == 1);

    // two identical pixels share one bin with count 2
    const std::array<std::vector<double>, 3> twice = {{{0.5, 0.5}, {0.25, 0.25}, {0.75, 0.75}}};
    const GamutDescriptor g2 = estimate_gamut(twice, 8);
    CHECK(g2.occupied_bins() == 1);
    CHECK(g2.total() == 2);

    // v = 1.0 lands in the last bin, not out of range
    const std::array<std::vector<double>, 3> white = {{{1.0}, {1.0}, {1.0}}};
    const GamutDescriptor g3 = estimate_gamut(white, 8);
    CHECK(g3.occupancy[8 * 8 * 8 - 1] == 1);

    CHECK_THROWS_AS(estimate_gamut({{{}, {}, {}}}, 8), argument_error);
    CHECK_THROWS_AS(estimate_gamut(black, 1), argument_error);
}

TEST_CASE("uniform sampling occupies every bin") {
    rng r(5);
    std::array<std::vector<double>, 3> samples;
    for (auto& ch : samples) ch.resize(1000000);
    for (std::size_t i = 0; i < 1000000; ++i) {
        samples[0][i] = r.real01();
        samples[1][i] = r.real01();
        samples[2][i] = r.real01();
    }
    const GamutDescriptor g = estimate_gamut(samples, 8);
    CHECK(g.occupied_bins() == 512);
    CHECK(g.total() == 1000000);
}

TEST_CASE("classification picks the best-overlapping reference") {
    // image identical to one reference and disjoint from the others
    const std::array<std::vector<double>, 3> low = {{{0.1, 0.2}, {0.1, 0.2}, {0.1, 0.2}}};
    const std::array<std::vector<double>, 3> high = {{{0.8, 0.9}, {0.8, 0.9}, {0.8, 0.9}}};
    std::map<ColorSpaceId, GamutDescriptor> refs;
    refs[ColorSpaceId::AdobeRGB] = estimate_gamut(low, 16);
    refs[ColorSpaceId::sRGB] = estimate_gamut(high, 16);
    refs[ColorSpaceId::AppleRGB] = estimate_gamut(high, 16);
    refs[ColorSpaceId::ColorMatchRGB] = estimate_gamut(high, 16);
    refs[ColorSpaceId::ProPhotoRGB] = estimate_gamut(high, 16);
    CHECK(classify_by_gamut(estimate_gamut(low, 16), refs) == ColorSpaceId::AdobeRGB);

    // all references identical: first class in order wins
    for (ColorSpaceId id : kAllSpaces) refs[id] = estimate_gamut(low, 16);
    CHECK(classify_by_gamut(estimate_gamut(low, 16), refs) == ColorSpaceId::AdobeRGB);
}

TEST_CASE("reference building covers spaces and is deterministic") {
    testutil::TempDir dir("gamut");
    // synthesize a tiny dataset: 2 sources into five spaces
    const auto src = dir.path() / "src";
    std::filesystem::create_directories(src);
    for (int i = 0; i < 2; ++i) {
        save_png16(testutil::make_natural_image(32, 24, 50 + i),
                   (src / ("g" + std::to_string(i) + ".png")).string());
    }
    const auto rows = build_dataset(src.string(), (dir.path() / "data").string(), ColorSpaceId::sRGB);

    const auto refs_a =
        build_reference_gamuts(rows, (dir.path() / "data").string(), 16, 300, 7);
    const auto refs_b =
        build_reference_gamuts(rows, (dir.path() / "data").string(), 16, 300, 7);
    REQUIRE(refs_a.size() == 5);
    for (ColorSpaceId id : kAllSpaces) {
        CHECK(refs_a.at(id).total() == 600); // 2 images x 300 samples
        CHECK(refs_a.at(id).occupancy == refs_b.at(id).occupancy);
    }

    // missing space -> coverage error
    std::vector<ManifestRow> partial;
    for (const auto& row : rows) {
        if (row.space != ColorSpaceId::sRGB) partial.push_back(row);
    }
    CHECK_THROWS_AS(build_reference_gamuts(partial, (dir.path() / "data").string(), 16, 300, 7),
                    coverage_error);
}

TEST_CASE("gamut binary serialization round trips") {
    testutil::TempDir dir("gamutio");
    rng r(9);
    std::array<std::vector<double>, 3> samples;
    for (auto& ch : samples) ch.resize(5000);
    for (std::size_t i = 0; i < 5000; ++i) {
        samples[0][i] = r.real01();
        samples[1][i] = r.real01() * 0.5;
        samples[2][i] = 0.2 + 0.3 * r.real01();
    }
    GamutDescriptor g = estimate_gamut(samples, 32);
    g.source = "sRGB";
    const std::string path = dir.str() + "/ref.gmt";
    save_gamut_binary(g, path);
    const GamutDescriptor back = load_gamut_binary(path);
    CHECK(back.bins_per_axis == 32);
    CHECK(back.occupancy == g.occupancy);
    CHECK(back.source == "sRGB");
}
