#include "levybsde/config.hpp"
#include "levybsde/errors.hpp"
#include "levybsde/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char** argv) {
    CLI::App app{"Coupled BSDE-with-jumps solver and nonlocal PDE verification runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "JSON experiment config")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--threads", threads, "worker thread cap");

    std::string entity;
    auto* describe = app.add_subcommand("describe", "print a model or measure card");
    describe->add_option("name", entity, "registered model or measure name")->required();

    CLI11_PARSE(app, argc, argv);

    if (describe->parsed()) {
        try {
            std::printf("%s\n", levybsde::describe_entity(entity).c_str());
            return 0;
        } catch (const levybsde::UnknownName& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 2;
        }
    }

    levybsde::RunOverrides overrides;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (seed_set) overrides.seed = seed;
    if (threads > 0) overrides.threads = threads;

    auto outcome = levybsde::run_experiment(config_path, overrides);
    if (!outcome.error.empty()) std::fprintf(stderr, "error: %s\n", outcome.error.c_str());
    for (const auto& report : outcome.reports) {
        std::printf("[%s] %s", report.pass ? "PASS" : "FAIL", report.name.c_str());
        auto seed_it = report.digest.find("seed");
        auto paths_it = report.digest.find("n_paths");
        if (seed_it != report.digest.end()) std::printf(" seed=%s", seed_it->second.c_str());
        if (paths_it != report.digest.end()) std::printf(" n_paths=%s", paths_it->second.c_str());
        for (const auto& [key, value] : report.statistics) std::printf(" %s=%g", key.c_str(), value);
        std::printf("\n");
    }
    if (!outcome.manifest_path.empty())
        std::printf("manifest: %s\n", outcome.manifest_path.c_str());
    return outcome.exit_code;
}
