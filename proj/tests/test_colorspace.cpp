#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "csid/colorspace.hpp"
#include "csid/dataset.hpp"
#include "csid/image_io.hpp"
#include "csid/rng.hpp"
#include "support/test_util.hpp"

using namespace csid;

namespace {

// Independent primaries-to-matrix construction: Cramer 3x3 solve, no Eigen.
std::array<std::array<double, 3>, 3> naive_rgb_to_xyz(const ColorSpaceDef& def) {
    double p[3][3];
    for (int c = 0; c < 3; ++c) {
        p[0][c] = def.primaries[c].x / def.primaries[c].y;
        p[1][c] = 1.0;
        p[2][c] = (1.0 - def.primaries[c].x - def.primaries[c].y) / def.primaries[c].y;
    }
    const double wx = def.white_point.x / def.white_point.y;
    const double wy = 1.0;
    const double wz = (1.0 - def.white_point.x - def.white_point.y) / def.white_point.y;
    const auto det3 = [](const double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double det = det3(p);
    double s[3];
    for (int c = 0; c < 3; ++c) {
        double repl[3][3];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) repl[i][j] = p[i][j];
        }
        repl[0][c] = wx;
        repl[1][c] = wy;
        repl[2][c] = wz;
        s[c] = det3(repl) / det;
    }
    std::array<std::array<double, 3>, 3> m{};
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) m[i][c] = p[i][c] * s[c];
    }
    return m;
}

} // namespace

TEST_CASE("derived matrices reproduce their white points") {
    const auto& reg = ColorSpaceRegistry::builtin();

    // sRGB white is D65
    const Eigen::Vector3d d65 = reg.get(ColorSpaceId::sRGB).rgb_to_xyz * Eigen::Vector3d::Ones();
    CHECK(d65[0] == Catch::Approx(0.9505).margin(1e-3));
    CHECK(d65[1] == Catch::Approx(1.0).margin(1e-9));
    CHECK(d65[2] == Catch::Approx(1.0890).margin(1e-3));

    // ProPhoto white is D50
    const Eigen::Vector3d d50 =
        reg.get(ColorSpaceId::ProPhotoRGB).rgb_to_xyz * Eigen::Vector3d::Ones();
    CHECK(d50[0] == Catch::Approx(0.9642).margin(1e-3));
    CHECK(d50[1] == Catch::Approx(1.0).margin(1e-9));
    CHECK(d50[2] == Catch::Approx(0.8249).margin(1e-3));

    // all five satisfy the 1e-6 invariant and map black to black
    for (ColorSpaceId id : kAllSpaces) {
        const auto& def = reg.get(id);
        const Eigen::Vector3d white = def.rgb_to_xyz * Eigen::Vector3d::Ones();
        const Eigen::Vector3d expected = xyz_of_white(def.white_point);
        CHECK((white - expected).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((def.rgb_to_xyz * Eigen::Vector3d::Zero()).norm() == 0.0);
        CHECK(std::abs(def.rgb_to_xyz.determinant()) > 1e-12);
    }
}

TEST_CASE("derived matrices match the naive Cramer construction") {
    const auto& reg = ColorSpaceRegistry::builtin();
    for (ColorSpaceId id : kAllSpaces) {
        const auto& def = reg.get(id);
        const auto naive = naive_rgb_to_xyz(def);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                CHECK(def.rgb_to_xyz(i, j) == Catch::Approx(naive[i][j]).margin(1e-9));
            }
        }
    }
}

TEST_CASE("collinear primaries raise a singular-geometry error") {
    ColorSpaceDef bad;
    bad.primaries = {Chromaticity{0.3, 0.3}, {0.4, 0.4}, {0.5, 0.5}};
    bad.white_point = {0.3127, 0.3290};
    CHECK_THROWS_AS(derive_rgb_to_xyz(bad), geometry_error);
}

TEST_CASE("transfer functions: endpoints, sRGB value, round trip, monotone") {
    const auto& reg = ColorSpaceRegistry::builtin();
    for (ColorSpaceId id : kAllSpaces) {
        const auto& def = reg.get(id);
        CHECK(decode_transfer(0.0, def) == 0.0);
        CHECK(decode_transfer(1.0, def) == Catch::Approx(1.0).margin(1e-12));
        CHECK(encode_transfer(0.0, def) == 0.0);
        CHECK(encode_transfer(1.0, def) == 1.0);

        // monotone on a 1024-point grid
        double prev = -1.0;
        for (int i = 0; i <= 1024; ++i) {
            const double u = decode_transfer(i / 1024.0, def);
            CHECK(u > prev);
            prev = u;
        }

        // encode(decode(v)) = v on a 1000-point grid
        for (int i = 0; i <= 1000; ++i) {
            const double v = i / 1000.0;
            CHECK(encode_transfer(decode_transfer(v, def), def) == Catch::Approx(v).margin(1e-9));
        }
    }

    // direct formula evaluation at v = 0.5 for sRGB
    const auto& srgb = reg.get(ColorSpaceId::sRGB);
    const double expected = std::pow((0.5 + 0.055) / 1.055, 2.4);
    CHECK(decode_transfer(0.5, srgb) == Catch::Approx(expected).margin(1e-12));
    CHECK(decode_transfer(0.5, srgb) == Catch::Approx(0.2140).margin(1e-4));
    CHECK(encode_transfer(0.2140, srgb) == Catch::Approx(0.5).margin(1e-4));

    // Adobe pure power uses the published 563/256 exponent
    const auto& adobe = reg.get(ColorSpaceId::AdobeRGB);
    CHECK(decode_transfer(0.5, adobe) == Catch::Approx(std::pow(0.5, 563.0 / 256.0)).margin(1e-12));
}

TEST_CASE("conversion plans: identity, shared white, composition") {
    const ConversionPlan self = plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::sRGB);
    CHECK((self.adapted_matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

    // shared D65 white: linear white maps to linear white
    const ConversionPlan to_adobe = plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::AdobeRGB);
    const Eigen::Vector3d white = to_adobe.adapted_matrix * Eigen::Vector3d::Ones();
    CHECK((white - Eigen::Vector3d::Ones()).cwiseAbs().maxCoeff() < 1e-6);

    // adaptation is the identity exactly when the whites match
    const auto& reg = ColorSpaceRegistry::builtin();
    const Eigen::Matrix3d adapt = bradford_adaptation(
        xyz_of_white(reg.get(ColorSpaceId::sRGB).white_point),
        xyz_of_white(reg.get(ColorSpaceId::AppleRGB).white_point));
    CHECK(adapt.isIdentity(0.0));

    // sRGB -> ProPhoto -> sRGB composes to the identity
    const ConversionPlan there = plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::ProPhotoRGB);
    const ConversionPlan back = plan_conversion(ColorSpaceId::ProPhotoRGB, ColorSpaceId::sRGB);
    const Eigen::Matrix3d round = back.adapted_matrix * there.adapted_matrix;
    CHECK((round - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("convert_image: identity plan is exact, black and white are fixed points") {
    const ImageRGB img = testutil::make_natural_image(16, 12, 21);
    ImageRGB tagged = img;
    tagged.space_tag = ColorSpaceId::sRGB;

    const ImageRGB same =
        convert_image(tagged, plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::sRGB));
    for (int c = 0; c < 3; ++c) CHECK(same.planes[c].samples == tagged.planes[c].samples);
    CHECK(same.space_tag == ColorSpaceId::sRGB);

    // black and white pixels are fixed points of every plan
    ImageRGB bw = make_image(2, 1);
    bw.planes[0].samples = {0.0, 1.0};
    bw.planes[1].samples = {0.0, 1.0};
    bw.planes[2].samples = {0.0, 1.0};
    for (ColorSpaceId src : kAllSpaces) {
        for (ColorSpaceId dst : kAllSpaces) {
            ImageRGB in = bw;
            in.space_tag = src;
            const ImageRGB out = convert_image(in, plan_conversion(src, dst));
            for (int c = 0; c < 3; ++c) {
                CHECK(std::abs(out.planes[c].samples[0]) < 1e-6);
                CHECK(std::abs(out.planes[c].samples[1] - 1.0) < 1e-6);
            }
            CHECK(out.space_tag == dst);
        }
    }

    // tag mismatch is a labeling error
    ImageRGB wrong = img;
    wrong.space_tag = ColorSpaceId::AppleRGB;
    CHECK_THROWS_AS(convert_image(wrong, plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::AdobeRGB)),
                    labeling_error);
}

TEST_CASE("in-gamut round trips stay within 1e-3 per channel") {
    rng r(555);
    const ConversionPlan fwd = plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::AdobeRGB);
    const ConversionPlan bwd = plan_conversion(ColorSpaceId::AdobeRGB, ColorSpaceId::sRGB);
    const auto& reg = ColorSpaceRegistry::builtin();
    const auto& srgb = reg.get(ColorSpaceId::sRGB);

    int tested = 0;
    for (int trial = 0; trial < 30000 && tested < 10000; ++trial) {
        const Eigen::Vector3d encoded{r.real01(), r.real01(), r.real01()};
        const Eigen::Vector3d lin{decode_transfer(encoded[0], srgb), decode_transfer(encoded[1], srgb),
                                  decode_transfer(encoded[2], srgb)};
        const Eigen::Vector3d target = fwd.adapted_matrix * lin;
        if (target.minCoeff() < 0.0 || target.maxCoeff() > 1.0) continue; // out of gamut
        ++tested;

        ImageRGB px = make_image(1, 1, ColorSpaceId::sRGB);
        for (int c = 0; c < 3; ++c) px.planes[c].samples[0] = encoded[c];
        const ImageRGB there = convert_image(px, fwd);
        const ImageRGB back = convert_image(there, bwd);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(back.planes[c].samples[0] - encoded[c]) < 1e-3);
        }
    }
    CHECK(tested == 10000);
}

TEST_CASE("build_dataset writes five spaces with an even manifest") {
    testutil::TempDir dir("dataset");
    const auto src = dir.path() / "src";
    const auto out = dir.path() / "out";
    std::filesystem::create_directories(src);
    for (int i = 0; i < 2; ++i) {
        save_png16(testutil::make_natural_image(24, 18, 100 + i),
                   (src / ("img" + std::to_string(i) + ".png")).string());
    }

    const auto rows = build_dataset(src.string(), out.string(), ColorSpaceId::sRGB);
    REQUIRE(rows.size() == 10);
    std::map<ColorSpaceId, int> counts;
    for (const auto& row : rows) counts[row.space]++;
    for (ColorSpaceId id : kAllSpaces) CHECK(counts[id] == 2);

    // manifest on disk matches
    const auto loaded = load_manifest((out / kManifestName).string());
    REQUIRE(loaded.size() == 10);

    // sidecar labels agree with the manifest
    for (const auto& row : loaded) {
        const ImageRGB img = load_image((out / row.file).string());
        CHECK(img.space_tag == row.space);
    }

    // the sRGB output of an sRGB source is bitwise identical to the
    // re-encoded source
    const ImageRGB source = load_image((src / "img0.png").string());
    ImageRGB tagged = source;
    tagged.space_tag = ColorSpaceId::sRGB;
    save_png16(tagged, (dir.path() / "reencoded.png").string());
    std::ifstream a((out / "img0__sRGB.png").string(), std::ios::binary);
    std::ifstream b((dir.path() / "reencoded.png").string(), std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);

    CHECK_THROWS_AS(build_dataset((dir.path() / "empty").string(), out.string(), ColorSpaceId::sRGB),
                    dataset_error);
}

TEST_CASE("adobe round trip through convert for in-gamut pixels") {
    // convert(convert(p, A->B), B->A) ~= p for pixels whose Adobe->sRGB
    // image lies inside [0,1]^3
    ImageRGB img = testutil::make_natural_image(12, 10, 77);
    img.space_tag = ColorSpaceId::AdobeRGB;
    const ConversionPlan fwd = plan_conversion(ColorSpaceId::AdobeRGB, ColorSpaceId::sRGB);
    const ImageRGB there = convert_image(img, fwd);
    const ImageRGB back = convert_image(there, plan_conversion(ColorSpaceId::sRGB, ColorSpaceId::AdobeRGB));

    const auto& adobe = ColorSpaceRegistry::builtin().get(ColorSpaceId::AdobeRGB);
    std::size_t in_gamut = 0;
    for (std::size_t i = 0; i < img.planes[0].samples.size(); ++i) {
        const Eigen::Vector3d lin{decode_transfer(img.planes[0].samples[i], adobe),
                                  decode_transfer(img.planes[1].samples[i], adobe),
                                  decode_transfer(img.planes[2].samples[i], adobe)};
        const Eigen::Vector3d target = fwd.adapted_matrix * lin;
        if (target.minCoeff() < 0.0 || target.maxCoeff() > 1.0) continue;
        ++in_gamut;
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(back.planes[c].samples[i] - img.planes[c].samples[i]) < 1e-3);
        }
    }
    CHECK(in_gamut > 50); // most of the scene is testable
}
