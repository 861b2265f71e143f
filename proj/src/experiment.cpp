#include "dynsc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "dynsc/error.hpp"
#include "dynsc/metrics.hpp"
#include "dynsc/propagate.hpp"
#include "dynsc/trajectory_io.hpp"

#ifndef DYNSC_VERSION
#define DYNSC_VERSION "0.0.0"
#endif

namespace dynsc::experiment {

namespace fs = std::filesystem;
using integrate::TrajectoryEnsemble;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kConfigCopy = "config.yaml";
constexpr const char* kDeterminism =
    "bitwise for any thread count: parallel loops write disjoint outputs and no reduction is split across threads";

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string digest_hex(EVP_MD_CTX* ctx) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

bool is_mesh_ensemble(const TrajectoryEnsemble& ens) { return ens.model == "bar"; }

std::string ensemble_name(config::Method m, int order) { return config::to_string(m) + "_q" + std::to_string(order); }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class RunRecorder {
public:
    RunRecorder(fs::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {}

    void add(const fs::path& file) {
        const auto rel = fs::relative(file, dir_).generic_string();
        std::erase_if(manifest_.artifacts, [&](const Artifact& a) { return a.path == rel; });
        manifest_.artifacts.push_back({rel, file_sha256(file), fs::file_size(file)});
    }

    void stage(const std::string& name, const std::function<void()>& body) {
        const auto start = std::chrono::steady_clock::now();
        body();
        manifest_.stages.push_back({name, seconds_since(start)});
        flush();
    }

    void flush() const { write_text(dir_ / kManifest, manifest_.to_json()); }

private:
    fs::path dir_;
    RunManifest& manifest_;
};

std::vector<std::size_t> default_components(const TrajectoryEnsemble& ens) {
    const std::size_t dim = ens.state_dim();
    if (is_mesh_ensemble(ens)) return {0, dim / 2};
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < std::min<std::size_t>(dim, 3); ++c) out.push_back(c);
    return out;
}

std::string component_name(const TrajectoryEnsemble& ens, std::size_t c) {
    if (is_mesh_ensemble(ens)) {
        const std::size_t n = ens.state_dim() / 2;
        return (c < n ? "u" : "v") + std::to_string(c < n ? c : c - n);
    }
    if (ens.model == "lorenz" && c < 3) return std::string(1, "xyz"[c]);
    return "c" + std::to_string(c);
}

std::size_t nearest_record(const TrajectoryEnsemble& ens, double t) {
    const auto it = std::lower_bound(ens.times.begin(), ens.times.end(), t - 1e-12);
    std::size_t k = static_cast<std::size_t>(it - ens.times.begin());
    if (k >= ens.n_records()) k = ens.n_records() - 1;
    if (k > 0 && std::abs(ens.times[k - 1] - t) < std::abs(ens.times[k] - t)) --k;
    return k;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<double>& x, const std::vector<double>& times,
                       const std::string& quantity, const std::string& source) {
    std::ostringstream s;
    s << "# quantity: " << quantity << "\n# source: " << source << "\n# rows: mesh nodes; columns: record times\n";
    s << "node,x";
    for (double t : times) s << ',' << num(t);
    s << '\n';
    for (Eigen::Index n = 0; n < m.rows(); ++n) {
        s << n << ',' << num(x[static_cast<std::size_t>(n)]);
        for (Eigen::Index k = 0; k < m.cols(); ++k) s << ',' << num(m(n, k));
        s << '\n';
    }
    return s.str();
}

}  // namespace

std::string version() { return std::string("dynsc ") + DYNSC_VERSION; }

std::string sha256_hex(const std::string& bytes) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    auto out = digest_hex(ctx);
    EVP_MD_CTX_free(ctx);
    return out;
}

std::string file_sha256(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    auto out = digest_hex(ctx);
    EVP_MD_CTX_free(ctx);
    return out;
}

std::string RunManifest::to_json() const {
    json j;
    j["version"] = version();
    j["schema_version"] = config::kSchemaVersion;
    j["config"] = kConfigCopy;
    j["config_sha256"] = config_sha256;
    j["seed"] = seed;
    j["threads"] = threads;
    j["determinism"] = kDeterminism;
    j["status"] = complete ? "complete" : (error.empty() ? "running" : "failed");
    if (!error.empty()) j["error"] = error;
    auto& st = j["stages"] = json::array();
    for (const auto& s : stages) st.push_back({{"name", s.name}, {"seconds", s.seconds}});
    auto& en = j["ensembles"] = json::array();
    for (const auto& e : ensembles) {
        en.push_back({{"method", e.method}, {"order", e.order}, {"grid_nodes", e.grid_nodes}, {"path", e.path}});
    }
    auto& su = j["summary"] = json::array();
    for (const auto& s : summaries) su.push_back(json::parse(s));
    auto& ar = j["artifacts"] = json::array();
    for (const auto& a : artifacts) ar.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    return j.dump(2) + "\n";
}

std::vector<fs::path> compare_ensembles(const TrajectoryEnsemble& reference, const TrajectoryEnsemble& surrogate,
                                        const fs::path& out_dir, const CompareOptions& options) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;

    const auto errors = metrics::trajectory_errors(reference, surrogate);
    {
        std::ostringstream s;
        s << "time,error_avg,error_max\n";
        for (std::size_t k = 0; k < errors.times.size(); ++k) {
            s << num(errors.times[k]) << ',' << num(errors.error_avg[k]) << ',' << num(errors.error_max[k]) << '\n';
        }
        written.push_back(out_dir / (options.prefix + "_errors.csv"));
        write_text(written.back(), s.str());
    }

    const bool any_failed = !reference.failures.empty() || !surrogate.failures.empty();
    if (!any_failed) {
        const auto w = metrics::distribution_error_series(reference, surrogate, options.wasserstein_stride, options.threads);
        std::ostringstream s;
        s << "record,time,distance\n";
        for (std::size_t r = 0; r < w.records.size(); ++r) {
            s << w.records[r] << ',' << num(w.times[r]) << ',' << num(w.distance[r]) << '\n';
        }
        written.push_back(out_dir / (options.prefix + "_wasserstein.csv"));
        write_text(written.back(), s.str());

        if (is_mesh_ensemble(reference) && options.node_stride > 0) {
            const std::size_t nodes = reference.state_dim() / 2;
            const auto f = metrics::node_distribution_errors(reference, surrogate, nodes, options.node_stride,
                                                             options.scale_u, options.scale_v, options.threads);
            std::ostringstream n;
            n << "record,time,node,distance\n";
            for (std::size_t r = 0; r < f.records.size(); ++r) {
                for (Eigen::Index node = 0; node < f.distance.rows(); ++node) {
                    n << f.records[r] << ',' << num(f.times[r]) << ',' << node << ','
                      << num(f.distance(node, static_cast<Eigen::Index>(r))) << '\n';
                }
            }
            written.push_back(out_dir / (options.prefix + "_node_wasserstein.csv"));
            write_text(written.back(), n.str());
        }
    }
    return written;
}

std::vector<fs::path> cmd_compare(const fs::path& reference, const fs::path& surrogate, const fs::path& out_dir,
                                  const CompareOptions& options) {
    const auto ref = integrate::load_ensemble(reference);
    const auto sur = integrate::load_ensemble(surrogate);
    if (ref.model != sur.model) throw ValidationError("surrogate", "model '" + sur.model + "' differs from reference '" + ref.model + "'");
    return compare_ensembles(ref, sur, out_dir, options);
}

RunManifest run_experiment(const config::ExperimentConfig& cfg_in, const std::string& config_text,
                           const RunOptions& options) {
    using config::Method;
    config::ExperimentConfig cfg = cfg_in;
    if (options.seed) cfg.seed = *options.seed;
    if (options.out) cfg.output = *options.out;
    cfg.validate();
    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    const auto log = [&](const std::string& msg) {
        if (options.log) *options.log << msg << std::endl;
    };

    const fs::path dir = cfg.output;
    fs::create_directories(dir);
    RunManifest manifest;
    manifest.directory = dir;
    manifest.config_sha256 = sha256_hex(config_text);
    manifest.seed = cfg.seed;
    manifest.threads = threads;
    RunRecorder rec(dir, manifest);
    write_text(dir / kConfigCopy, config_text);
    rec.add(dir / kConfigCopy);

    try {
        const auto model = config::make_model(cfg.model);
        const auto& space = model->parameter_space();
        const std::size_t state_dim = static_cast<std::size_t>(model->initial_state().size());
        for (std::size_t c : cfg.metrics.components) {
            if (c >= state_dim) throw ValidationError("metrics.components", "index exceeds the state dimension");
        }
        Eigen::MatrixXd samples;
        rec.stage("sampling", [&] {
            samples = propagate::sample_parameters(space, cfg.samples, cfg.seed);
            json j;
            j["names"] = model->parameter_names();
            j["points"] = json::array();
            for (Eigen::Index i = 0; i < samples.cols(); ++i) {
                const Eigen::VectorXd col = samples.col(i);
                j["points"].push_back(std::vector<double>(col.data(), col.data() + col.size()));
            }
            write_text(dir / "samples.json", j.dump() + "\n");
            rec.add(dir / "samples.json");
        });

        std::optional<TrajectoryEnsemble> reference;
        if (cfg.has(Method::Reference)) {
            rec.stage("reference", [&] {
                log("reference: " + std::to_string(cfg.samples) + " samples");
                reference = propagate::run_reference(*model, samples, cfg.integrator, threads);
                const auto payload = integrate::save_ensemble(*reference, dir / "reference.json");
                rec.add(dir / "reference.json");
                rec.add(payload);
                manifest.ensembles.push_back({"reference", 0, 0, "reference.json"});
            });
        }

        CompareOptions copt;
        copt.wasserstein_stride = cfg.metrics.wasserstein_stride;
        copt.node_stride = cfg.metrics.node_wasserstein_stride;
        copt.scale_u = cfg.metrics.scale_u;
        copt.scale_v = cfg.metrics.scale_v;
        copt.threads = threads;

        const auto finish = [&](const TrajectoryEnsemble& ens, Method m, int order, std::size_t grid_nodes,
                                json extra) {
            const auto name = ensemble_name(m, order);
            const auto payload = integrate::save_ensemble(ens, dir / (name + ".json"));
            rec.add(dir / (name + ".json"));
            rec.add(payload);
            manifest.ensembles.push_back({config::to_string(m), order, grid_nodes, name + ".json"});
            json summary = {{"method", config::to_string(m)}, {"order", order}, {"grid_nodes", grid_nodes},
                            {"failures", ens.failures.size()}};
            if (extra.is_object()) summary.update(extra);
            if (reference) {
                copt.prefix = name;
                for (const auto& p : compare_ensembles(*reference, ens, dir, copt)) rec.add(p);
                const auto e = metrics::trajectory_errors(*reference, ens);
                summary["max_error_avg"] = *std::max_element(e.error_avg.begin(), e.error_avg.end());
                summary["max_error_max"] = *std::max_element(e.error_max.begin(), e.error_max.end());
                summary["final_error_avg"] = e.error_avg.back();
            }
            manifest.summaries.push_back(summary.dump());
        };

        for (int order : cfg.grid.orders) {
            const auto grid = cfg.grid.build(space.dims(), order);
            const auto gamma = pgrid::interpolation_matrix(grid, space.to_reference(samples));
            const auto tag = "q" + std::to_string(order);
            write_text(dir / ("grid_" + tag + ".json"), grid.to_json() + "\n");
            rec.add(dir / ("grid_" + tag + ".json"));
            log("grid " + tag + ": " + std::to_string(grid.size()) + " nodes");

            std::optional<TrajectoryEnsemble> nodes;
            if (cfg.has(Method::StateSc) || cfg.has(Method::DynScOffline)) {
                rec.stage("nodes_" + tag, [&] {
                    nodes = propagate::run_reference(*model, propagate::node_parameters(space, grid), cfg.integrator,
                                                     threads);
                    const auto payload = integrate::save_ensemble(*nodes, dir / ("nodes_" + tag + ".json"));
                    rec.add(dir / ("nodes_" + tag + ".json"));
                    rec.add(payload);
                });
                if (!nodes->failures.empty()) throw Error("exact simulation failed at a collocation node");
            }
            if (cfg.has(Method::StateSc)) {
                rec.stage("state_sc_" + tag, [&] {
                    log("state_sc " + tag);
                    finish(propagate::run_state_sc(*nodes, gamma, samples), Method::StateSc, order, grid.size(), {});
                });
            }
            if (cfg.has(Method::DynScOffline)) {
                rec.stage("dyn_sc_offline_" + tag, [&] {
                    log("dyn_sc_offline " + tag);
                    auto r = propagate::run_dyn_sc_offline(*model, *nodes, gamma, samples, cfg.sindy, cfg.integrator,
                                                           threads);
                    json models = json::array();
                    for (const auto& m : r.node_models) models.push_back(json::parse(m.to_json()));
                    const auto path = dir / ("node_models_dyn_sc_offline_" + tag + ".json");
                    write_text(path, models.dump() + "\n");
                    rec.add(path);
                    std::size_t active = 0;
                    for (const auto& m : r.node_models) active += m.active_count();
                    finish(r.ensemble, Method::DynScOffline, order, grid.size(), {{"active_terms", active}});
                });
            }
            if (cfg.has(Method::DynScSemiOnline)) {
                rec.stage("dyn_sc_semionline_" + tag, [&] {
                    log("dyn_sc_semionline " + tag);
                    auto r = propagate::run_dyn_sc_semionline(*model, grid, gamma, samples, cfg.sindy, cfg.monitor,
                                                              cfg.integrator, threads);
                    const auto log_path = dir / ("learning_log_" + tag + ".json");
                    write_text(log_path, r.log.to_json() + "\n");
                    rec.add(log_path);
                    json models = json::array();
                    for (const auto& m : r.node_models) models.push_back(json::parse(m.to_json()));
                    const auto path = dir / ("node_models_dyn_sc_semionline_" + tag + ".json");
                    write_text(path, models.dump() + "\n");
                    rec.add(path);
                    finish(r.ensemble, Method::DynScSemiOnline, order, grid.size(),
                           {{"learning_events", r.log.events.size()}, {"relearn_count", r.log.relearn_count()}});
                });
            }
        }
        manifest.complete = true;
        rec.flush();
    } catch (const std::exception& e) {
        manifest.error = e.what();
        rec.flush();
        throw;
    }
    return manifest;
}

RunManifest cmd_run(const fs::path& config_path, const RunOptions& options) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("config", "cannot open '" + config_path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    const auto cfg = config::parse_config(text.str());
    return run_experiment(cfg, text.str(), options);
}

std::vector<fs::path> cmd_emit_plots(const fs::path& run_dir, std::optional<fs::path> out_dir) {
    const fs::path manifest_path = run_dir / kManifest;
    if (!fs::exists(manifest_path)) throw Error("missing artifact '" + manifest_path.string() + "'");
    const json manifest = json::parse(read_text(manifest_path));
    if (manifest.value("status", "") != "complete") throw Error("run in '" + run_dir.string() + "' did not complete");
    const auto cfg = config::load_config(run_dir / kConfigCopy);
    const auto model = config::make_model(cfg.model);
    const fs::path out = out_dir ? *out_dir : run_dir / "plots";
    fs::create_directories(out);
    std::vector<fs::path> written;

    std::vector<std::pair<std::string, TrajectoryEnsemble>> surrogates;
    std::optional<TrajectoryEnsemble> reference;
    for (const auto& e : manifest.at("ensembles")) {
        const fs::path p = run_dir / e.at("path").get<std::string>();
        if (!fs::exists(p)) throw Error("missing artifact '" + p.string() + "'");
        auto ens = integrate::load_ensemble(p);
        const auto method = e.at("method").get<std::string>();
        if (method == "reference") {
            reference = std::move(ens);
        } else {
            surrogates.emplace_back(method + "_q" + std::to_string(e.at("order").get<int>()), std::move(ens));
        }
    }
    if (!reference) throw Error("run has no reference ensemble to compare against");

    // Space-time error grids.
    if (model->is_mesh()) {
        const auto* bar = dynamic_cast<const models::BarModel*>(model.get());
        const Eigen::VectorXd xc = bar->node_coordinates();
        const std::vector<double> x(xc.data(), xc.data() + xc.size());
        const std::size_t n = reference->state_dim() / 2;
        for (const auto& [name, ens] : surrogates) {
            for (const auto& [field, offset] : {std::pair<std::string, std::size_t>{"u", 0}, {"v", n}}) {
                const auto fe = metrics::field_errors(*reference, ens, offset, n);
                for (const auto& [stat, m] : {std::pair<std::string, const Eigen::MatrixXd*>{"avg", &fe.avg}, {"max", &fe.max}}) {
                    const auto path = out / (name + "_" + field + "_error_" + stat + ".csv");
                    write_text(path, matrix_csv(*m, x, reference->times,
                                                stat + " over samples of |" + field + " - " + field + "_surrogate|",
                                                name));
                    written.push_back(path);
                }
            }
        }
    }

    const auto components = cfg.metrics.components.empty() ? default_components(*reference) : cfg.metrics.components;

    // KDE marginals.
    std::vector<double> kde_times = cfg.metrics.kde_times;
    if (kde_times.empty()) kde_times.push_back(reference->times.back());
    for (double t : kde_times) {
        const std::size_t k = nearest_record(*reference, t);
        for (std::size_t c : components) {
            const auto values = [&](const TrajectoryEnsemble& ens) {
                std::vector<double> v;
                for (std::size_t i = 0; i < ens.n_samples(); ++i) {
                    const double s = ens.states[i](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
                    if (std::isfinite(s)) v.push_back(s);
                }
                return v;
            };
            const auto ref_values = values(*reference);
            double lo = *std::min_element(ref_values.begin(), ref_values.end());
            double hi = *std::max_element(ref_values.begin(), ref_values.end());
            const double pad = std::max(0.25 * (hi - lo), 1e-6 * std::max(1.0, std::abs(hi)));
            lo -= pad;
            hi += pad;
            std::vector<double> grid(cfg.metrics.kde_points);
            for (std::size_t p = 0; p < grid.size(); ++p) {
                grid[p] = lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(grid.size() - 1);
            }
            std::vector<std::pair<std::string, metrics::KdeResult>> columns;
            columns.emplace_back("reference", metrics::kde_1d(ref_values, grid));
            for (const auto& [name, ens] : surrogates) {
                const auto v = values(ens);
                if (v.size() >= 2) columns.emplace_back(name, metrics::kde_1d(v, grid));
            }
            std::ostringstream s;
            s << "# quantity: kernel density of " << component_name(*reference, c) << "\n# time: "
              << num(reference->times[k]) << "\n# bandwidth:";
            for (const auto& [name, kde] : columns) s << ' ' << name << '=' << num(kde.bandwidth);
            s << "\n# point mass columns are empty\n";
            s << 'x';
            for (const auto& [name, _] : columns) s << ',' << name;
            s << '\n';
            for (std::size_t p = 0; p < grid.size(); ++p) {
                s << num(grid[p]);
                for (const auto& [_, kde] : columns) s << ',' << (kde.point_mass ? "" : num(kde.density[p]));
                s << '\n';
            }
            const auto path = out / ("kde_" + component_name(*reference, c) + "_t" + num(reference->times[k]) + ".csv");
            write_text(path, s.str());
            written.push_back(path);
        }
    }

    // Trajectory extracts for the first few samples.
    const std::size_t count = std::min(cfg.metrics.extract_samples, reference->n_samples());
    for (std::size_t i = 0; i < count; ++i) {
        std::ostringstream s;
        s << "# quantity: state components of sample " << i << "\ntime";
        for (std::size_t c : components) s << ",reference:" << component_name(*reference, c);
        for (const auto& [name, ens] : surrogates) {
            for (std::size_t c : components) s << ',' << name << ':' << component_name(*reference, c);
        }
        s << '\n';
        for (std::size_t k = 0; k < reference->n_records(); ++k) {
            s << num(reference->times[k]);
            const auto col = static_cast<Eigen::Index>(k);
            for (std::size_t c : components) s << ',' << num(reference->states[i](static_cast<Eigen::Index>(c), col));
            for (const auto& [_, ens] : surrogates) {
                for (std::size_t c : components) s << ',' << num(ens.states[i](static_cast<Eigen::Index>(c), col));
            }
            s << '\n';
        }
        const auto path = out / ("trajectory_sample" + std::to_string(i) + ".csv");
        write_text(path, s.str());
        written.push_back(path);
    }
    return written;
}

}  // namespace dynsc::experiment
