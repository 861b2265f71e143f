#include "dynsc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dynsc/error.hpp"

namespace dynsc::config {

namespace {

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ValidationError(path, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) throw ValidationError(path.empty() ? key : path + "." + key, "unknown key");
    }
}

template <typename T>
T read(const YAML::Node& node, const std::string& field) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ValidationError(field, "cannot parse value");
    }
}

template <typename T>
void maybe(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
    if (const auto n = parent[key]) out = read<T>(n, path + "." + key);
}

std::size_t read_count(const YAML::Node& node, const std::string& field) {
    const auto v = read<long long>(node, field);
    if (v < 0) throw ValidationError(field, "must be >= 0");
    return static_cast<std::size_t>(v);
}

void maybe_count(const YAML::Node& parent, const char* key, const std::string& path, std::size_t& out) {
    if (const auto n = parent[key]) out = read_count(n, path + "." + key);
}

std::vector<double> read_numbers(const YAML::Node& node, const std::string& field) {
    if (node.IsScalar()) return {read<double>(node, field)};
    if (!node.IsSequence()) throw ValidationError(field, "expected a number or a list of numbers");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(read<double>(v, field));
    return out;
}

double scalar_override(const ModelSpec& spec, const std::string& key, double fallback) {
    const auto it = spec.overrides.find(key);
    if (it == spec.overrides.end()) return fallback;
    if (it->second.size() != 1) throw ValidationError("model.overrides." + key, "expected one value");
    return it->second.front();
}

void check_override_keys(const ModelSpec& spec, std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : spec.overrides) {
        if (!ok.count(key)) throw ValidationError("model.overrides." + key, "not accepted by model '" + spec.id + "'");
    }
}

pgrid::ParameterSpace space_or(const ModelSpec& spec, const pgrid::ParameterSpace& fallback) {
    if (spec.bounds.empty()) return fallback;
    if (spec.bounds.size() != fallback.dims()) {
        throw ValidationError("parameter_space.bounds",
                              "model '" + spec.id + "' has " + std::to_string(fallback.dims()) + " parameters");
    }
    std::vector<double> lo, hi;
    for (const auto& [l, h] : spec.bounds) lo.push_back(l), hi.push_back(h);
    return {lo, hi};
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::Reference: return "reference";
        case Method::StateSc: return "state_sc";
        case Method::DynScOffline: return "dyn_sc_offline";
        case Method::DynScSemiOnline: return "dyn_sc_semionline";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "reference" || s == "mc") return Method::Reference;
    if (s == "state_sc") return Method::StateSc;
    if (s == "dyn_sc_offline") return Method::DynScOffline;
    if (s == "dyn_sc_semionline") return Method::DynScSemiOnline;
    throw ValidationError("methods", "unknown method '" + s + "'");
}

pgrid::CollocationGrid GridSpec::build(std::size_t dims, int order) const {
    if (kind == pgrid::GridKind::Sparse) return pgrid::CollocationGrid::sparse(dims, order);
    return pgrid::CollocationGrid::tensor(std::vector<int>(dims, order));
}

bool ExperimentConfig::has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

void ExperimentConfig::validate() const {
    if (version != kSchemaVersion) throw ValidationError("version", "unsupported schema version");
    make_model(model);
    if (samples < 1) throw ValidationError("sampling.count", "must be >= 1");
    if (grid.orders.empty()) throw ValidationError("grid.orders", "must list at least one order");
    for (int q : grid.orders) {
        if (grid.kind == pgrid::GridKind::Sparse && q < 1) throw ValidationError("grid.orders", "sparse orders must be >= 1");
        if (grid.kind == pgrid::GridKind::Tensor && q < 0) throw ValidationError("grid.orders", "tensor levels must be >= 0");
    }
    integrator.validate();
    sindy.validate();
    monitor.validate();
    if (methods.empty()) throw ValidationError("methods", "must list at least one method");
    if (metrics.wasserstein_stride < 1) throw ValidationError("metrics.wasserstein_stride", "must be >= 1");
    if (metrics.kde_points < 2) throw ValidationError("metrics.kde_points", "must be >= 2");
    const double t_final = integrator.dt * static_cast<double>(integrator.n_steps);
    for (double t : metrics.kde_times) {
        if (!(t >= 0.0 && t <= t_final)) throw ValidationError("metrics.kde_times", "outside the simulated interval");
    }
    if (output.empty()) throw ValidationError("output.dir", "must not be empty");
}

std::unique_ptr<models::Model> make_model(const ModelSpec& spec) {
    if (spec.id == "lorenz") {
        check_override_keys(spec, {"initial"});
        const models::LorenzModel nominal;
        Eigen::Vector3d initial = nominal.initial_state();
        if (const auto it = spec.overrides.find("initial"); it != spec.overrides.end()) {
            if (it->second.size() != 3) throw ValidationError("model.overrides.initial", "expected 3 values");
            initial = Eigen::Vector3d(it->second[0], it->second[1], it->second[2]);
        }
        return std::make_unique<models::LorenzModel>(space_or(spec, nominal.parameter_space()), initial);
    }
    if (spec.id == "linear") {
        check_override_keys(spec, {"initial"});
        const models::LinearModel nominal;
        return std::make_unique<models::LinearModel>(space_or(spec, nominal.parameter_space()),
                                                     scalar_override(spec, "initial", nominal.initial_state()[0]));
    }
    if (spec.id == "bar") {
        check_override_keys(spec, {"n_elements", "length", "density", "v0", "fixed_right"});
        models::BarConfig c;
        const double n = scalar_override(spec, "n_elements", static_cast<double>(c.n_elements));
        if (!(n >= 1.0) || n != std::floor(n)) throw ValidationError("model.overrides.n_elements", "must be a positive integer");
        c.n_elements = static_cast<std::size_t>(n);
        c.length = scalar_override(spec, "length", c.length);
        c.density = scalar_override(spec, "density", c.density);
        c.v0 = scalar_override(spec, "v0", c.v0);
        c.fixed_right = scalar_override(spec, "fixed_right", 1.0) != 0.0;
        if (!(c.length > 0.0)) throw ValidationError("model.overrides.length", "must be > 0");
        if (!(c.density > 0.0)) throw ValidationError("model.overrides.density", "must be > 0");
        if (!spec.bounds.empty()) {
            if (spec.bounds.size() != 2) throw ValidationError("parameter_space.bounds", "model 'bar' has 2 parameters");
            c.eps1 = {spec.bounds[0].first, spec.bounds[0].second};
            c.eps2 = {spec.bounds[1].first, spec.bounds[1].second};
        }
        return std::make_unique<models::BarModel>(c);
    }
    throw ValidationError("model.id", "unknown model '" + spec.id + "'");
}

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ValidationError("config", std::string("YAML syntax error: ") + e.what());
    }
    if (!root || root.IsNull()) throw ValidationError("config", "empty document");
    check_keys(root, "", {"version", "name", "model", "parameter_space", "sampling", "grid", "integrator", "sindy",
                          "monitor", "methods", "metrics", "output"});
    ExperimentConfig c;
    maybe(root, "version", "", c.version);
    maybe(root, "name", "", c.name);

    const auto model = root["model"];
    if (!model) throw ValidationError("model", "required");
    check_keys(model, "model", {"id", "overrides"});
    if (!model["id"]) throw ValidationError("model.id", "required");
    c.model.id = read<std::string>(model["id"], "model.id");
    if (const auto ov = model["overrides"]) {
        check_keys(ov, "model.overrides", {"initial", "n_elements", "length", "density", "v0", "fixed_right"});
        for (const auto& kv : ov) {
            const auto key = kv.first.as<std::string>();
            if (kv.second.IsScalar() && (kv.second.Scalar() == "true" || kv.second.Scalar() == "false")) {
                c.model.overrides[key] = {kv.second.Scalar() == "true" ? 1.0 : 0.0};
            } else {
                c.model.overrides[key] = read_numbers(kv.second, "model.overrides." + key);
            }
        }
    }

    if (const auto ps = root["parameter_space"]) {
        check_keys(ps, "parameter_space", {"bounds"});
        const auto b = ps["bounds"];
        if (!b || !b.IsSequence()) throw ValidationError("parameter_space.bounds", "expected a list of [lo, hi]");
        for (const auto& pair : b) {
            const auto v = read_numbers(pair, "parameter_space.bounds");
            if (v.size() != 2 || !(v[0] < v[1])) throw ValidationError("parameter_space.bounds", "each entry must be [lo, hi] with lo < hi");
            c.model.bounds.emplace_back(v[0], v[1]);
        }
    }

    if (const auto s = root["sampling"]) {
        check_keys(s, "sampling", {"count", "seed"});
        maybe_count(s, "count", "sampling", c.samples);
        maybe(s, "seed", "sampling", c.seed);
    }

    if (const auto g = root["grid"]) {
        check_keys(g, "grid", {"kind", "orders"});
        if (const auto k = g["kind"]) {
            try {
                c.grid.kind = pgrid::grid_kind_from_string(read<std::string>(k, "grid.kind"));
            } catch (const ValidationError&) {
                throw ValidationError("grid.kind", "expected 'sparse' or 'tensor'");
            }
        }
        if (const auto o = g["orders"]) {
            c.grid.orders.clear();
            for (double q : read_numbers(o, "grid.orders")) {
                if (q != std::floor(q)) throw ValidationError("grid.orders", "must be integers");
                c.grid.orders.push_back(static_cast<int>(q));
            }
        }
    }

    if (const auto in = root["integrator"]) {
        check_keys(in, "integrator", {"scheme", "dt", "n_steps", "stride"});
        if (const auto s = in["scheme"]) {
            try {
                c.integrator.scheme = integrate::scheme_from_string(read<std::string>(s, "integrator.scheme"));
            } catch (const ValidationError&) {
                throw ValidationError("integrator.scheme", "expected 'euler', 'rk4' or 'verlet'");
            }
        }
        maybe(in, "dt", "integrator", c.integrator.dt);
        maybe_count(in, "n_steps", "integrator", c.integrator.n_steps);
        maybe_count(in, "stride", "integrator", c.integrator.stride);
    }

    if (const auto s = root["sindy"]) {
        check_keys(s, "sindy", {"max_degree", "sweep", "sweep_count", "sweep_lo", "sweep_hi", "validation_stride",
                                "max_rounds", "scale_columns", "local", "snapshots", "offline_window", "basis_cap"});
        maybe(s, "max_degree", "sindy", c.sindy.max_degree);
        if (const auto sw = s["sweep"]) c.sindy.sweep = read_numbers(sw, "sindy.sweep");
        maybe_count(s, "sweep_count", "sindy", c.sindy.sweep_count);
        maybe(s, "sweep_lo", "sindy", c.sindy.sweep_lo);
        maybe(s, "sweep_hi", "sindy", c.sindy.sweep_hi);
        maybe_count(s, "validation_stride", "sindy", c.sindy.validation_stride);
        maybe(s, "max_rounds", "sindy", c.sindy.max_rounds);
        maybe(s, "scale_columns", "sindy", c.sindy.scale_columns);
        maybe(s, "local", "sindy", c.sindy.local);
        maybe_count(s, "snapshots", "sindy", c.sindy.snapshots);
        maybe_count(s, "offline_window", "sindy", c.sindy.offline_window);
        maybe_count(s, "basis_cap", "sindy", c.sindy.basis_cap);
    }

    if (const auto m = root["monitor"]) {
        check_keys(m, "monitor", {"tau_abs", "tau_rel", "memory_budget"});
        maybe(m, "tau_abs", "monitor", c.monitor.tau_abs);
        maybe(m, "tau_rel", "monitor", c.monitor.tau_rel);
        maybe_count(m, "memory_budget", "monitor", c.monitor.memory_budget);
    }

    const auto methods = root["methods"];
    if (!methods) throw ValidationError("methods", "required");
    if (!methods.IsSequence()) throw ValidationError("methods", "expected a list");
    for (const auto& m : methods) {
        const Method method = method_from_string(read<std::string>(m, "methods"));
        if (!c.has(method)) c.methods.push_back(method);
    }

    if (const auto m = root["metrics"]) {
        check_keys(m, "metrics", {"wasserstein_stride", "node_wasserstein_stride", "scale_u", "scale_v", "kde_times",
                                  "kde_points", "components", "extract_samples"});
        maybe_count(m, "wasserstein_stride", "metrics", c.metrics.wasserstein_stride);
        maybe_count(m, "node_wasserstein_stride", "metrics", c.metrics.node_wasserstein_stride);
        maybe(m, "scale_u", "metrics", c.metrics.scale_u);
        maybe(m, "scale_v", "metrics", c.metrics.scale_v);
        if (const auto t = m["kde_times"]) c.metrics.kde_times = read_numbers(t, "metrics.kde_times");
        maybe_count(m, "kde_points", "metrics", c.metrics.kde_points);
        if (const auto comp = m["components"]) {
            for (double v : read_numbers(comp, "metrics.components")) {
                if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError("metrics.components", "must be indices >= 0");
                c.metrics.components.push_back(static_cast<std::size_t>(v));
            }
        }
        maybe_count(m, "extract_samples", "metrics", c.metrics.extract_samples);
    }

    if (const auto o = root["output"]) {
        check_keys(o, "output", {"dir"});
        if (const auto d = o["dir"]) c.output = read<std::string>(d, "output.dir");
    }

    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

}  // namespace dynsc::config
