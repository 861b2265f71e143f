#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dynsc/config.hpp"
#include "dynsc/error.hpp"
#include "dynsc/experiment.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace dynsc;

    CLI::App app{"Uncertainty propagation with stochastic collocation over states and learned dynamics"};
    app.set_version_flag("--version", experiment::version());
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    auto* run = app.add_subcommand("run", "Run every method listed in a config");
    run->add_option("--config", config_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
    auto* run_out = run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    auto* run_seed = run->add_option("--seed", seed, "Sampling seed (overrides sampling.seed)");
    run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    std::string reference_path, surrogate_path;
    experiment::CompareOptions compare_opts;
    auto* compare = app.add_subcommand("compare", "Error and distribution metrics between two saved ensembles");
    compare->add_option("reference", reference_path, "Reference ensemble header (.json)")->required()->check(CLI::ExistingFile);
    compare->add_option("surrogate", surrogate_path, "Surrogate ensemble header (.json)")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", out_dir, "Output directory")->required();
    compare->add_option("--prefix", compare_opts.prefix, "File name prefix");
    compare->add_option("--stride", compare_opts.wasserstein_stride, "Record stride for distribution distances")
        ->check(CLI::PositiveNumber);
    compare->add_option("--node-stride", compare_opts.node_stride, "Record stride for per-node distances (0 = off)");
    compare->add_option("--scale-u", compare_opts.scale_u, "Displacement scaling for per-node distances");
    compare->add_option("--scale-v", compare_opts.scale_v, "Velocity scaling for per-node distances");
    compare->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    std::string run_dir;
    auto* plots = app.add_subcommand("emit-plots", "Plot-ready CSVs from a completed run directory");
    plots->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    auto* plots_out = plots->add_option("--out", out_dir, "Output directory (default: <run_dir>/plots)");

    auto* check = app.add_subcommand("validate-config", "Parse and validate a config without running it");
    check->add_option("--config", config_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) {
            experiment::RunOptions opts;
            if (*run_out) opts.out = out_dir;
            if (*run_seed) opts.seed = seed;
            opts.threads = threads;
            opts.log = &std::cerr;
            const auto manifest = experiment::cmd_run(config_path, opts);
            std::cout << (manifest.directory / "manifest.json").string() << '\n';
        } else if (*compare) {
            compare_opts.threads = threads;
            for (const auto& p : experiment::cmd_compare(reference_path, surrogate_path, out_dir, compare_opts)) {
                std::cout << p.string() << '\n';
            }
        } else if (*plots) {
            std::optional<std::filesystem::path> out;
            if (*plots_out) out = out_dir;
            for (const auto& p : experiment::cmd_emit_plots(run_dir, out)) std::cout << p.string() << '\n';
        } else if (*check) {
            const auto cfg = config::load_config(config_path);
            std::cout << "ok: " << (cfg.name.empty() ? config_path : cfg.name) << '\n';
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
