// capspoe command-line front end.
//
// Exit codes: 0 success, 1 verification/training failure, 2 usage or input
// errors.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "capspoe/pipeline.hpp"

namespace {

capspoe::RunConfig load_config(const std::string& config_path,
                               const std::optional<std::uint64_t>& seed,
                               const std::string& out_dir, const std::string& data_dir) {
    capspoe::RunConfig cfg = capspoe::RunConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!data_dir.empty()) cfg.dataset_path = data_dir;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capspoe: unsupervised capsule-network training as a routing-weighted "
                 "product of expert neurons"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples_override;
    std::size_t sample_index = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "run configuration file");
        if (config_required) opt->required();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_option("--data-dir", data_dir, "override the dataset directory");
    };

    CLI::App* train_ae = app.add_subcommand("train-autoencoder",
                                            "train the convolutional autoencoder front end");
    add_common(train_ae, true);
    CLI::App* train_caps = app.add_subcommand(
        "train-capsules", "train the capsule layer on the frozen encoder's features");
    add_common(train_caps, true);
    CLI::App* gen = app.add_subcommand("generate", "sample capsules and emit an image grid");
    add_common(gen, true);
    gen->add_option("--samples", samples_override, "samples per capsule (overrides config)");
    CLI::App* diagram = app.add_subcommand("diagram", "render a routing diagram for one sample");
    add_common(diagram, true);
    diagram->add_option("--sample", sample_index, "dataset sample index");
    CLI::App* verify = app.add_subcommand("verify", "run the exact-oracle self-check suite");
    add_common(verify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) {
            std::uint64_t vseed = 1234567;
            std::string vout = "out";
            if (!config_path.empty()) {
                capspoe::RunConfig cfg = load_config(config_path, seed, out_dir, data_dir);
                vseed = cfg.seed;
                vout = cfg.out_dir;
            } else {
                if (seed) vseed = *seed;
                if (!out_dir.empty()) vout = out_dir;
            }
            capspoe::VerifyReport rep = capspoe::cmd_verify(vseed, vout);
            std::printf("verify seed: %llu\n", static_cast<unsigned long long>(rep.seed));
            for (const auto& c : rep.checks) {
                std::printf("[%s] %-55s worst=%.3e limit=%.3e %s\n", c.pass ? "PASS" : "FAIL",
                            c.name.c_str(), c.worst, c.limit, c.detail.c_str());
            }
            std::printf("%s\n", rep.all_pass() ? "all checks passed" : "CHECKS FAILED");
            return rep.all_pass() ? 0 : 1;
        }

        capspoe::RunConfig cfg = load_config(config_path, seed, out_dir, data_dir);
        if (train_ae->parsed()) {
            std::string path = capspoe::cmd_train_autoencoder(cfg);
            std::printf("wrote %s\n", path.c_str());
        } else if (train_caps->parsed()) {
            std::string path = capspoe::cmd_train_capsules(cfg);
            std::printf("wrote %s\n", path.c_str());
        } else if (gen->parsed()) {
            if (samples_override) cfg.samples_per_capsule = *samples_override;
            cfg.validate();
            std::string path = capspoe::cmd_generate(cfg);
            std::printf("wrote %s\n", path.c_str());
        } else if (diagram->parsed()) {
            std::string path = capspoe::cmd_diagram(cfg, sample_index);
            std::printf("wrote %s\n", path.c_str());
        }
        return 0;
    } catch (const capspoe::NumericError& e) {
        std::fprintf(stderr, "training failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
