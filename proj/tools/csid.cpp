// csid — identify the RGB-family color space an image is encoded in.
//
// Subcommands: dataset, extract, train, identify, evaluate, diagnose.
// Exit codes: 0 success, 1 usage/config, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "csid/csid.hpp"

namespace {

struct GlobalOpts {
    std::string config_path;
    bool json = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

csid::PipelineConfig resolve_config(const GlobalOpts& g) {
    csid::PipelineConfig cfg =
        g.config_path.empty() ? csid::PipelineConfig{} : csid::load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.jobs) cfg.jobs = *g.jobs;
    cfg.validate();
    return cfg;
}

std::string pick(const std::string& flag_value, const std::string& config_value,
                 const std::string& what) {
    if (!flag_value.empty()) return flag_value;
    if (!config_value.empty()) return config_value;
    throw csid::argument_error("missing " + what + " (set it on the command line or in the config)");
}

int cmd_dataset(const GlobalOpts& g, const std::string& src, const std::string& out,
                const std::string& source_space) {
    csid::PipelineConfig cfg = resolve_config(g);
    const std::string src_dir = pick(src, cfg.paths.corpus, "source directory (--src)");
    const std::string out_dir = pick(out, cfg.paths.dataset, "output directory (--out)");
    if (!source_space.empty()) cfg.source_space = csid::space_from_string(source_space);

    const auto reg = csid::registry_from_config(cfg);
    const auto rows = csid::build_dataset(src_dir, out_dir, cfg.source_space, reg);

    std::map<csid::ColorSpaceId, int> counts;
    for (const auto& row : rows) counts[row.space]++;
    if (g.json) {
        nlohmann::json j;
        j["manifest"] = (std::filesystem::path(out_dir) / csid::kManifestName).string();
        for (const auto& [space, count] : counts) j["counts"][csid::to_string(space)] = count;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "wrote " << rows.size() << " images to " << out_dir << "\n";
        for (const auto& [space, count] : counts) {
            std::cout << "  " << csid::to_string(space) << ": " << count << "\n";
        }
        std::cout << "manifest: " << (std::filesystem::path(out_dir) / csid::kManifestName).string()
                  << "\n";
    }
    return 0;
}

int cmd_extract(const GlobalOpts& g, const std::string& dataset, const std::string& store) {
    const csid::PipelineConfig cfg = resolve_config(g);
    const std::string dataset_dir = pick(dataset, cfg.paths.dataset, "dataset directory (--dataset)");
    const std::string store_path = pick(store, cfg.paths.store, "feature store path (--store)");

    const csid::ExtractOutcome outcome = csid::run_extract(cfg, dataset_dir, store_path);
    const std::size_t attempted = outcome.extracted + outcome.failures.size();
    if (g.json) {
        nlohmann::json j;
        j["extracted"] = outcome.extracted;
        j["resumed"] = outcome.resumed;
        j["failures"] = outcome.failures;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "extracted " << outcome.extracted << " rows (" << outcome.resumed
                  << " already present) into " << store_path << "\n";
        for (const auto& f : outcome.failures) std::cerr << "failed: " << f << "\n";
    }
    // tolerate isolated failures; fail the run when more than 10% of the
    // attempted images could not be extracted
    if (!outcome.failures.empty() &&
        10 * outcome.failures.size() > attempted) {
        std::cerr << outcome.failures.size() << "/" << attempted << " extractions failed\n";
        return 2;
    }
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& store, const std::string& bundle) {
    const csid::PipelineConfig cfg = resolve_config(g);
    const std::string store_path = pick(store, cfg.paths.store, "feature store path (--store)");
    const std::string bundle_path = pick(bundle, cfg.paths.bundle, "bundle path (--bundle)");

    const csid::ModelBundle trained = csid::run_train(cfg, store_path);
    csid::save_bundle(trained, bundle_path);
    if (g.json) {
        nlohmann::json j;
        j["bundle"] = bundle_path;
        j["fingerprint"] = trained.fingerprint;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "bundle written to " << bundle_path << " (fingerprint " << trained.fingerprint
                  << ")\n";
    }
    return 0;
}

int cmd_identify(const GlobalOpts& g, const std::string& image, const std::string& bundle) {
    const csid::ModelBundle loaded = csid::load_bundle(bundle);
    const csid::Prediction pred = csid::identify_image(loaded, image);
    if (g.json) {
        nlohmann::json j;
        j["space"] = csid::to_string(pred.label);
        for (std::size_t c = 0; c < loaded.pipeline.mlr.classes.size(); ++c) {
            j["probabilities"][csid::to_string(loaded.pipeline.mlr.classes[c])] =
                pred.probabilities[static_cast<Eigen::Index>(c)];
        }
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "space: " << csid::to_string(pred.label) << "\n";
        for (std::size_t c = 0; c < loaded.pipeline.mlr.classes.size(); ++c) {
            std::cout << "  " << csid::to_string(loaded.pipeline.mlr.classes[c]) << ": "
                      << pred.probabilities[static_cast<Eigen::Index>(c)] << "\n";
        }
    }
    return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& store, const std::string& report,
                 bool with_baseline, const std::string& dataset) {
    const csid::PipelineConfig cfg = resolve_config(g);
    const std::string store_path = pick(store, cfg.paths.store, "feature store path (--store)");
    const std::string report_prefix = !report.empty() ? report : cfg.paths.report;

    const csid::EvalReport rep = csid::run_evaluate(cfg, store_path);
    std::string text = csid::report_to_text(
        rep, "Embedding pipeline (" + csid::to_string(cfg.mode) + ", J=" + std::to_string(cfg.J) + ")");
    nlohmann::json j;
    j["pipeline"] = csid::report_to_json(rep);
    j["fingerprint"] = csid::config_fingerprint(cfg);

    if (with_baseline) {
        const std::string dataset_dir =
            pick(dataset, cfg.paths.dataset, "dataset directory (--dataset)");
        const auto manifest = csid::load_manifest(
            (std::filesystem::path(dataset_dir) / csid::kManifestName).string());
        const csid::EvalReport base = csid::evaluate_gamut_baseline(
            manifest, dataset_dir, cfg.baseline.bins, cfg.baseline.samples_per_image, cfg.folds,
            cfg.seed);
        text += "\n" + csid::report_to_text(
                           base, "Gamut baseline (reimplementation by description, " +
                                     std::to_string(cfg.baseline.bins) + " bins/axis)");
        j["baseline"] = csid::report_to_json(base);
    }

    std::cout << text;
    if (!report_prefix.empty()) {
        csid::write_text_atomic(report_prefix + ".txt", text);
        csid::write_text_atomic(report_prefix + ".json", j.dump(2) + "\n");
        std::cout << "reports: " << report_prefix << ".{txt,json}\n";
    }
    if (g.json) std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_diagnose(const GlobalOpts& g, const std::string& dataset, const std::string& report,
                 std::size_t limit, double alpha) {
    const csid::PipelineConfig cfg = resolve_config(g);
    const std::string dataset_dir =
        pick(dataset, cfg.paths.dataset, "image directory (--dataset)");

    const csid::DiagnoseReport rep = csid::run_diagnose(cfg, dataset_dir, limit, alpha);
    const nlohmann::json j = csid::diagnose_to_json(rep);

    std::ostringstream text;
    text << "Residual normality over " << rep.rows.size() << " image/pair fits\n";
    text << "  full-residual K-S rejection rate:  " << 100.0 * rep.full_rejection_rate << " %\n";
    text << "  tau-weighted K-S rejection rate:   " << 100.0 * rep.weighted_rejection_rate << " %\n";
    text << "  mean excess kurtosis:              " << rep.mean_excess_kurtosis << "\n";
    text << "  Gaussian-compatible pixel fraction: " << 100.0 * rep.mean_pi0 << " %\n";
    if (!rep.skipped.empty()) text << "  skipped: " << rep.skipped.size() << "\n";
    std::cout << text.str();

    const std::string report_prefix = !report.empty() ? report : cfg.paths.report;
    if (!report_prefix.empty()) {
        csid::write_text_atomic(report_prefix + ".txt", text.str());
        csid::write_text_atomic(report_prefix + ".json", j.dump(2) + "\n");
        std::cout << "reports: " << report_prefix << ".{txt,json}\n";
    }
    if (g.json) std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RGB-family color space identification"};
    app.require_subcommand(1);

    GlobalOpts g;
    std::uint64_t seed_value = 0;
    int jobs_value = 0;
    app.add_option("--config", g.config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
    auto* jobs_opt = app.add_option("--jobs", jobs_value, "worker threads (0 = all cores)");
    app.add_flag("--json", g.json, "emit machine-readable JSON on stdout");

    std::string src, out, source_space, dataset, store, bundle, image, report;
    bool with_baseline = false;
    std::size_t limit = 0;
    double alpha = 0.05;

    auto* c_dataset = app.add_subcommand("dataset", "synthesize the five-space corpus");
    c_dataset->add_option("--src", src, "directory of source images");
    c_dataset->add_option("--out", out, "output dataset directory");
    c_dataset->add_option("--source-space", source_space, "space the sources are encoded in");

    auto* c_extract = app.add_subcommand("extract", "fit embeddings and store feature vectors");
    c_extract->add_option("--dataset", dataset, "dataset directory (with manifest.jsonl)");
    c_extract->add_option("--store", store, "feature store path (JSON lines)");

    auto* c_train = app.add_subcommand("train", "train standardizer + GDA + MLR bundle");
    c_train->add_option("--store", store, "feature store path");
    c_train->add_option("--bundle", bundle, "output bundle path");

    auto* c_identify = app.add_subcommand("identify", "identify one image's color space");
    c_identify->add_option("image", image, "image to identify")->required();
    c_identify->add_option("--bundle", bundle, "trained bundle path")->required();

    auto* c_evaluate = app.add_subcommand("evaluate", "stratified cross-validated accuracy");
    c_evaluate->add_option("--store", store, "feature store path");
    c_evaluate->add_option("--report", report, "report path prefix");
    c_evaluate->add_flag("--baseline", with_baseline, "also evaluate the gamut baseline");
    c_evaluate->add_option("--dataset", dataset, "dataset directory (for the baseline)");

    auto* c_diagnose = app.add_subcommand("diagnose", "residual K-S normality diagnostics");
    c_diagnose->add_option("--dataset", dataset, "directory of images to diagnose");
    c_diagnose->add_option("--report", report, "report path prefix");
    c_diagnose->add_option("--limit", limit, "diagnose at most this many images");
    c_diagnose->add_option("--alpha", alpha, "K-S significance level");

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;
    if (jobs_opt->count() > 0) g.jobs = jobs_value;

    try {
        if (c_dataset->parsed()) return cmd_dataset(g, src, out, source_space);
        if (c_extract->parsed()) return cmd_extract(g, dataset, store);
        if (c_train->parsed()) return cmd_train(g, store, bundle);
        if (c_identify->parsed()) return cmd_identify(g, image, bundle);
        if (c_evaluate->parsed()) return cmd_evaluate(g, store, report, with_baseline, dataset);
        if (c_diagnose->parsed()) return cmd_diagnose(g, dataset, report, limit, alpha);
    } catch (const csid::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.category()) {
            case csid::error_category::usage: return 1;
            case csid::error_category::data: return 2;
            case csid::error_category::numeric: return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
