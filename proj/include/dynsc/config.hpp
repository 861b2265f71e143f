#pragma once

// Declarative experiment description read from YAML.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynsc/integrate.hpp"
#include "dynsc/models.hpp"
#include "dynsc/pgrid.hpp"
#include "dynsc/propagate.hpp"

namespace dynsc::config {

inline constexpr int kSchemaVersion = 1;

enum class Method { Reference, StateSc, DynScOffline, DynScSemiOnline };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct ModelSpec {
    std::string id;
    /// Scalar or list overrides; the accepted keys depend on the model.
    std::map<std::string, std::vector<double>> overrides;
    /// Per-dimension [lo, hi]; empty keeps the model's defaults.
    std::vector<std::pair<double, double>> bounds;
};

struct GridSpec {
    pgrid::GridKind kind = pgrid::GridKind::Sparse;
    /// Smolyak orders (>= 1) for sparse grids, isotropic levels (>= 0) for tensor grids.
    std::vector<int> orders = {1};

    pgrid::CollocationGrid build(std::size_t dims, int order) const;
};

struct MetricsSpec {
    std::size_t wasserstein_stride = 1;
    /// Per-node distances for mesh models; 0 disables them.
    std::size_t node_wasserstein_stride = 0;
    double scale_u = 1.0;
    double scale_v = 1.0;
    std::vector<double> kde_times;
    std::size_t kde_points = 201;
    /// State components for KDE marginals and trajectory extracts; empty picks a default.
    std::vector<std::size_t> components;
    std::size_t extract_samples = 4;
};

struct ExperimentConfig {
    int version = kSchemaVersion;
    std::string name;
    ModelSpec model;
    std::size_t samples = 64;
    std::uint64_t seed = 0;
    GridSpec grid;
    integrate::IntegratorConfig integrator;
    propagate::SindyConfig sindy;
    propagate::DivergenceMonitor monitor;
    std::vector<Method> methods;
    MetricsSpec metrics;
    std::filesystem::path output = "out";

    /// Throws ValidationError naming the offending field.
    void validate() const;
    bool has(Method m) const;
};

/// Parses and validates. Errors name the offending field.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the model described by `spec`; unknown ids and keys are ValidationErrors.
std::unique_ptr<models::Model> make_model(const ModelSpec& spec);

}  // namespace dynsc::config
