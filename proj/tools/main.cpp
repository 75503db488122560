#include "commands.hpp"

#include "ssrlab/config.hpp"
#include "ssrlab/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int run(const std::string& subcommand, const std::string& config_path, const ssrlab::cli::Overrides& overrides) {
    using namespace ssrlab;
    nlohmann::json document;
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config '" << config_path << "'\n";
        return cli::kConfigError;
    }
    try {
        document = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "error: " << config_path << " is not valid JSON: " << e.what() << "\n";
        return cli::kConfigError;
    }
    cli::apply_overrides(document, overrides);

    RunConfig config;
    try {
        config = parse_run_config(document, subcommand);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    }

    try {
        const cli::Outcome outcome = cli::execute(config);
        for (const auto& f : outcome.files) std::cout << f << "\n";
        for (const auto& p : outcome.problems) std::cerr << "numeric failure: " << p << "\n";
        return outcome.exit_code;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return cli::kNumericError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked self-supervised ridge estimator: predictions and Monte Carlo checks"};
    app.set_version_flag("--version", std::string(SSRLAB_VERSION));
    bool print_schema = false;
    app.add_flag("--schema", print_schema, "Print the config JSON schema and exit");
    app.require_subcommand(0, 1);

    struct Slot {
        CLI::App* app;
        std::string config;
        ssrlab::cli::Overrides overrides;
        std::uint64_t seed = 0;
    };
    const std::vector<std::pair<std::string, std::string>> descriptions = {
        {"predict", "Deterministic-equivalent risks over an (alpha, lambda) grid"},
        {"simulate", "Monte Carlo generalization/training risk against predictions"},
        {"spectrum", "Empirical eigenvalue histogram against the predicted density"},
        {"bbp", "Spiked-model outlier sweep over a theta grid"},
        {"phase-curve", "AR(1) SSR-vs-PCA phase boundary over a rho grid"},
        {"compare-pca", "Empirical SSR risk against empirical PCA risk"},
    };
    std::vector<Slot> slots(descriptions.size());
    for (std::size_t i = 0; i < descriptions.size(); ++i) {
        Slot& s = slots[i];
        s.app = app.add_subcommand(descriptions[i].first, descriptions[i].second);
        s.app->add_option("--config", s.config, "JSON config file")->required()->check(CLI::ExistingFile);
        s.app->add_option("--out", s.overrides.out_dir, "Output directory (overrides output.dir)");
        s.app->add_option("--format", s.overrides.format, "csv, json or both")
            ->check(CLI::IsMember({"csv", "json", "both"}));
        s.app->add_option("--threads", s.overrides.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
        s.app->add_option("--seed", s.seed, "Master seed (overrides experiment.master_seed)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return ssrlab::cli::kConfigError;
    }

    if (print_schema) {
        std::cout << ssrlab::config_schema().dump(2) << "\n";
        return ssrlab::cli::kSuccess;
    }
    for (Slot& s : slots) {
        if (!s.app->parsed()) continue;
        s.overrides.has_seed = s.app->count("--seed") > 0;
        s.overrides.seed = s.seed;
        return run(s.app->get_name(), s.config, s.overrides);
    }
    std::cout << app.help();
    return ssrlab::cli::kConfigError;
}
