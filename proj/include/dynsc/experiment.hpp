#pragma once

// Config-driven runs, pairwise comparisons and plot-data emission. Every
// artifact a run writes is listed in manifest.json with its SHA-256.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dynsc/config.hpp"
#include "dynsc/integrate.hpp"

namespace dynsc::experiment {

std::string version();

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

struct RunOptions {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::ostream* log = nullptr;
};

struct Artifact {
    std::string path;  // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct StageTiming {
    std::string name;
    double seconds = 0.0;
};

struct EnsembleEntry {
    std::string method;
    int order = 0;
    std::size_t grid_nodes = 0;
    std::string path;
};

struct RunManifest {
    std::filesystem::path directory;
    std::string config_sha256;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool complete = false;
    std::string error;
    std::vector<StageTiming> stages;
    std::vector<EnsembleEntry> ensembles;
    std::vector<Artifact> artifacts;
    /// One JSON object per surrogate ensemble compared against the reference.
    std::vector<std::string> summaries;

    std::string to_json() const;
};

/// Runs every configured method. The manifest is rewritten after each stage,
/// so a failing run still lists the artifacts it completed.
RunManifest run_experiment(const config::ExperimentConfig& cfg, const std::string& config_text,
                           const RunOptions& options);
RunManifest cmd_run(const std::filesystem::path& config_path, const RunOptions& options);

struct CompareOptions {
    std::size_t wasserstein_stride = 1;
    /// Per-node distances for mesh ensembles ([u; v] states); 0 disables them.
    std::size_t node_stride = 1;
    double scale_u = 1.0;
    double scale_v = 1.0;
    std::size_t threads = 1;
    std::string prefix = "compare";
};

/// Writes <prefix>_errors.csv, <prefix>_wasserstein.csv and, for mesh
/// ensembles, <prefix>_node_wasserstein.csv into `out_dir`. Returns the paths.
std::vector<std::filesystem::path> compare_ensembles(const integrate::TrajectoryEnsemble& reference,
                                                     const integrate::TrajectoryEnsemble& surrogate,
                                                     const std::filesystem::path& out_dir,
                                                     const CompareOptions& options);
std::vector<std::filesystem::path> cmd_compare(const std::filesystem::path& reference,
                                               const std::filesystem::path& surrogate,
                                               const std::filesystem::path& out_dir, const CompareOptions& options);

/// Space-time error grids (mesh models), KDE marginals and trajectory
/// extracts from a completed run directory; `out_dir` defaults to run_dir/plots.
std::vector<std::filesystem::path> cmd_emit_plots(const std::filesystem::path& run_dir,
                                                  std::optional<std::filesystem::path> out_dir = std::nullopt);

}  // namespace dynsc::experiment
