#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "csid/features.hpp"
#include "csid/gda.hpp"
#include "support/test_util.hpp"

using namespace csid;

namespace {

FeatureConfig cheap_cfg(std::uint64_t seed, int max_iter = 4) {
    FeatureConfig cfg;
    cfg.fit.seed = seed;
    cfg.fit.restarts = 1;
    cfg.fit.max_iter = max_iter;
    cfg.M_candidates = {2};
    return cfg;
}

} // namespace

TEST_CASE("feature lengths follow the closed forms for J in {1,2,3}") {
    CHECK(intra_feature_length(1) == 24);
    CHECK(intra_feature_length(2) == 72);
    CHECK(intra_feature_length(3) == 144);
    CHECK(inter_feature_length(1) == 54);
    CHECK(inter_feature_length(2) == 150);
    CHECK(inter_feature_length(3) == 294);

    const ImageRGB img = testutil::make_natural_image(24, 24, 11);
    for (int J = 1; J <= 3; ++J) {
        const FeatureVector fi = intra_features(img, "img", J, cheap_cfg(1));
        CHECK(fi.values.size() == 3 * ((2 * J + 1) * (2 * J + 1) - 1));
        const FeatureVector fe = inter_features(img, "img", J, cheap_cfg(1));
        CHECK(fe.values.size() == 6 * (2 * J + 1) * (2 * J + 1));
    }
    const FeatureVector fc = extract_features(img, "img", FeatureMode::concat, 2, cheap_cfg(1));
    CHECK(fc.values.size() == 72 + 150);
}

TEST_CASE("feature extraction is deterministic in the seed") {
    const ImageRGB img = testutil::make_natural_image(20, 20, 13);
    const FeatureVector a = intra_features(img, "x", 1, cheap_cfg(5, 10));
    const FeatureVector b = intra_features(img, "x", 1, cheap_cfg(5, 10));
    CHECK(a.values == b.values);
    const FeatureVector c = intra_features(img, "x", 1, cheap_cfg(6, 10));
    CHECK(a.values != c.values);
}

TEST_CASE("constant-gray image completes through the ridge fallback") {
    ImageRGB gray = make_image(16, 16);
    for (auto& plane : gray.planes) plane = ChannelPlane::constant(16, 16, 0.5);
    const FeatureVector f = intra_features(gray, "gray", 1, cheap_cfg(3));
    CHECK(f.values.allFinite());
}

TEST_CASE("duplicated channel recovers the center-column unit vector") {
    ImageRGB img = testutil::make_natural_image(24, 24, 17);
    img.planes[1] = img.planes[0]; // C2 = C1 exactly
    FitConfig fit;
    fit.seed = 19;
    fit.restarts = 2;
    const EmbeddingModel model = fit_embedding(img.planes[0], img.planes[1], {0, 1}, 1, 2, fit);
    // center of the 3x3 sweep is index 4
    for (Eigen::Index i = 0; i < 9; ++i) {
        CHECK(model.embeddable.gamma[i] == Catch::Approx(i == 4 ? 1.0 : 0.0).margin(1e-6));
    }
}

TEST_CASE("standardizer centers and scales training rows") {
    std::vector<Eigen::VectorXd> rows;
    rng r(23);
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd v(3);
        v << 5.0 + r.normal01(), 100.0 + 10.0 * r.normal01(), r.normal01() * 0.01;
        rows.push_back(v);
    }
    const Standardizer s = Standardizer::fit(rows);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (const auto& row : rows) mean += s.apply(row);
    mean /= 40.0;
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);

    // zero-variance coordinates are left unscaled rather than divided by zero
    std::vector<Eigen::VectorXd> flat(5, Eigen::VectorXd::Constant(2, 3.0));
    const Standardizer sf = Standardizer::fit(flat);
    CHECK(sf.apply(flat[0]).allFinite());
}

TEST_CASE("feature store round trip and resume key") {
    testutil::TempDir dir("store");
    const std::string path = dir.str() + "/features.jsonl";

    FeatureStoreRow row;
    row.feature.image_id = "img1.png";
    row.feature.mode = FeatureMode::intra;
    row.feature.J = 2;
    row.feature.label = ColorSpaceId::ProPhotoRGB;
    row.feature.values = (Eigen::VectorXd(3) << 0.125, -2.5, 1e-9).finished();
    row.seed = 42;
    {
        std::ofstream out(path, std::ios::app);
        append_feature_row(out, row);
    }
    // a torn final line is ignored on load
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"image_id\": \"torn";
    }
    const auto rows = load_feature_store(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].feature.image_id == "img1.png");
    CHECK(rows[0].feature.mode == FeatureMode::intra);
    CHECK(rows[0].feature.J == 2);
    CHECK(rows[0].seed == 42);
    CHECK(rows[0].feature.label == ColorSpaceId::ProPhotoRGB);
    CHECK(rows[0].feature.values == row.feature.values); // exact double round trip
}

// ---------------------------------------------------------------------------
// GDA
// ---------------------------------------------------------------------------

namespace {

std::vector<FeatureVector> two_blobs(int per_class, std::uint64_t seed, double scale = 1.0) {
    rng r(seed);
    std::vector<FeatureVector> out;
    for (int i = 0; i < per_class; ++i) {
        FeatureVector a;
        a.values = Eigen::VectorXd::Constant(1, scale * (0.0 + 0.01 * r.normal01()));
        a.label = ColorSpaceId::AdobeRGB;
        a.image_id = "a" + std::to_string(i);
        out.push_back(a);
        FeatureVector b;
        b.values = Eigen::VectorXd::Constant(1, scale * (1.0 + 0.01 * r.normal01()));
        b.label = ColorSpaceId::sRGB;
        b.image_id = "b" + std::to_string(i);
        out.push_back(b);
    }
    return out;
}

} // namespace

TEST_CASE("GDA separates two blobs far beyond their pooled spread") {
    const auto blobs = two_blobs(20, 31);
    const GdaModel model = fit_gda(blobs, 1);

    double mean_a = 0.0, mean_b = 0.0;
    std::vector<double> proj_a, proj_b;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const double z = model.train_projections(static_cast<Eigen::Index>(i), 0);
        if (blobs[i].label == ColorSpaceId::AdobeRGB) {
            proj_a.push_back(z);
            mean_a += z;
        } else {
            proj_b.push_back(z);
            mean_b += z;
        }
    }
    mean_a /= static_cast<double>(proj_a.size());
    mean_b /= static_cast<double>(proj_b.size());
    double pooled = 0.0;
    for (double z : proj_a) pooled += (z - mean_a) * (z - mean_a);
    for (double z : proj_b) pooled += (z - mean_b) * (z - mean_b);
    pooled = std::sqrt(pooled / static_cast<double>(proj_a.size() + proj_b.size()));
    CHECK(std::abs(mean_a - mean_b) > 5.0 * pooled);

    // nearest-centroid classification in projected space is perfect
    int correct = 0;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const double z = project_values(model, blobs[i].values)[0];
        const ColorSpaceId pred = std::abs(z - mean_a) < std::abs(z - mean_b)
                                      ? ColorSpaceId::AdobeRGB
                                      : ColorSpaceId::sRGB;
        if (pred == *blobs[i].label) ++correct;
    }
    CHECK(correct == static_cast<int>(blobs.size()));
}

TEST_CASE("GDA projection contracts") {
    const auto blobs = two_blobs(10, 33);
    const GdaModel model = fit_gda(blobs, 1);

    // projecting a training point reproduces its stored projection
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const Eigen::VectorXd z = project_values(model, blobs[i].values);
        CHECK(z[0] == Catch::Approx(model.train_projections(static_cast<Eigen::Index>(i), 0))
                          .margin(1e-9));
    }

    // out_dim respects classes-1 and the requested dimension
    CHECK(model.out_dim == 1);
    CHECK(project_values(model, blobs[0].values).size() == 1);

    // five classes, out_dim=4 -> 4 coordinates
    rng r(35);
    std::vector<FeatureVector> five;
    for (ColorSpaceId id : kAllSpaces) {
        for (int i = 0; i < 8; ++i) {
            FeatureVector f;
            f.values = Eigen::VectorXd(2);
            f.values << static_cast<double>(id) + 0.05 * r.normal01(),
                -static_cast<double>(id) + 0.05 * r.normal01();
            f.label = id;
            f.image_id = to_string(id) + std::to_string(i);
            five.push_back(f);
        }
    }
    const GdaModel model5 = fit_gda(five, 4);
    CHECK(model5.out_dim == 4);
    CHECK(project_values(model5, five[0].values).size() == 4);

    // length mismatch is an argument error
    CHECK_THROWS_AS(project_values(model, Eigen::VectorXd::Zero(7)), argument_error);

    // a class with < 2 samples is degenerate
    std::vector<FeatureVector> degen = two_blobs(3, 37);
    degen.resize(degen.size() - 1);
    FeatureVector lone;
    lone.values = Eigen::VectorXd::Constant(1, 0.5);
    lone.label = ColorSpaceId::AppleRGB;
    lone.image_id = "lone";
    degen.push_back(lone);
    CHECK_THROWS_AS(fit_gda(degen, 1), degenerate_class_error);
}

TEST_CASE("GDA is stable under duplication and global rescale") {
    const auto blobs = two_blobs(12, 39);
    // pin the bandwidth for the duplication comparison: re-estimating the
    // median distance over duplicated points (with their zero-distance pairs)
    // would change the kernel itself
    KernelDesc pinned;
    pinned.bandwidth = 0.75;
    const GdaModel base = fit_gda(blobs, 1, pinned);

    // duplicating every training point leaves the direction unchanged up to
    // sign/scale: compare per-sample projections via cosine similarity
    auto doubled = blobs;
    for (auto f : blobs) {
        f.image_id += "_dup";
        doubled.push_back(f);
    }
    const GdaModel dup = fit_gda(doubled, 1, pinned);
    Eigen::VectorXd za(blobs.size()), zb(blobs.size());
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        za[static_cast<Eigen::Index>(i)] = project_values(base, blobs[i].values)[0];
        zb[static_cast<Eigen::Index>(i)] = project_values(dup, blobs[i].values)[0];
    }
    const double cos_dup = std::abs(za.dot(zb)) / (za.norm() * zb.norm());
    CHECK(cos_dup >= 0.999);

    // global input rescale with the median-heuristic bandwidth rescaling
    // accordingly: projections match up to sign/scale
    const GdaModel med_base = fit_gda(blobs, 1);
    const auto scaled = two_blobs(12, 39, 10.0);
    const GdaModel big = fit_gda(scaled, 1);
    CHECK(big.kernel.bandwidth == Catch::Approx(10.0 * med_base.kernel.bandwidth).epsilon(1e-9));
    Eigen::VectorXd zm(blobs.size()), zc(blobs.size());
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        zm[static_cast<Eigen::Index>(i)] = project_values(med_base, blobs[i].values)[0];
        zc[static_cast<Eigen::Index>(i)] = project_values(big, scaled[i].values)[0];
    }
    const double cos_scale = std::abs(zm.dot(zc)) / (zm.norm() * zc.norm());
    CHECK(cos_scale >= 0.999);

    // linear kernel option works as the LDA ablation
    KernelDesc lin;
    lin.kind = KernelDesc::Kind::linear;
    const GdaModel lda = fit_gda(blobs, 1, lin);
    CHECK(lda.train_projections.allFinite());
}

TEST_CASE("GDA serialization round trip preserves projections") {
    const auto blobs = two_blobs(8, 41);
    const GdaModel model = fit_gda(blobs, 1);
    const GdaModel back = gda_from_json(gda_to_json(model));
    for (const auto& f : blobs) {
        CHECK(project_values(back, f.values)[0] ==
              Catch::Approx(project_values(model, f.values)[0]).margin(1e-12));
    }
}
