#include "dynsc/propagate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include <json.hpp>

namespace dynsc::propagate {

using integrate::SampleFailure;
using integrate::Stepper;
using integrate::TrajectoryEnsemble;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TrajectoryEnsemble empty_ensemble(const models::Model& model, const integrate::IntegratorConfig& config,
                                  const Eigen::MatrixXd& params, std::size_t state_dim) {
    TrajectoryEnsemble ens;
    ens.model = model.id();
    ens.dt = config.dt;
    ens.stride = config.stride;
    ens.times = integrate::record_times(config);
    ens.param_points = params;
    ens.states.assign(static_cast<std::size_t>(params.cols()),
                      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(state_dim),
                                                static_cast<Eigen::Index>(ens.times.size()), kNaN));
    return ens;
}

void sort_failures(std::vector<SampleFailure>& failures) {
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.sample < b.sample; });
}

double total_residual(const surrogate::SurrogateDynamics& m) {
    double sq = 0.0;
    for (const auto& b : m.blocks()) sq += b.validation_residual * b.validation_residual;
    return std::sqrt(sq);
}

void require_intact(const TrajectoryEnsemble& nodes) {
    if (!nodes.failures.empty()) {
        throw Error("collocation node " + std::to_string(nodes.failures.front().sample) +
                    " failed: " + nodes.failures.front().message);
    }
    for (const auto& s : nodes.states) {
        if (static_cast<std::size_t>(s.cols()) != nodes.n_records()) {
            throw ValidationError("node_trajectories", "time grids do not match");
        }
    }
}

}  // namespace

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void SindyConfig::validate() const {
    if (max_degree < 1) throw ValidationError("sindy.max_degree", "must be >= 1");
    if (!std::is_sorted(sweep.begin(), sweep.end())) throw ValidationError("sindy.sweep", "must be ascending");
    for (double t : sweep) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("sindy.sweep", "thresholds must be finite and >= 0");
    }
    if (sweep.empty()) {
        if (sweep_count < 1) throw ValidationError("sindy.sweep_count", "must be >= 1");
        if (!(sweep_lo > 0.0) || !(sweep_hi >= sweep_lo)) {
            throw ValidationError("sindy.sweep_range", "need 0 < lo <= hi");
        }
    }
    if (validation_stride < 2) throw ValidationError("sindy.validation_stride", "must be >= 2");
    if (max_rounds < 1) throw ValidationError("sindy.max_rounds", "must be >= 1");
}

void DivergenceMonitor::validate() const {
    if (!(tau_abs >= 0.0) || !(tau_rel >= 0.0)) throw ValidationError("monitor.tau", "tolerances must be >= 0");
    if (!(tau_abs > 0.0 || tau_rel > 0.0)) throw ValidationError("monitor.tau", "tau_abs or tau_rel must be > 0");
    if (memory_budget < 1) throw ValidationError("monitor.memory_budget", "must be >= 1");
}

double DivergenceMonitor::divergence(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) const {
    if (!predicted.allFinite()) return std::numeric_limits<double>::infinity();
    return (predicted - exact).norm();
}

bool DivergenceMonitor::outdated(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) const {
    const double d = divergence(predicted, exact);
    return d > 0.0 && d >= std::max(tau_abs, tau_rel * exact.norm());
}

Eigen::MatrixXd sample_parameters(const pgrid::ParameterSpace& space, std::size_t count, std::uint64_t seed) {
    if (count < 1) throw ValidationError("sampling.count", "must be >= 1");
    std::mt19937_64 gen(seed);
    const auto dims = static_cast<Eigen::Index>(space.dims());
    Eigen::MatrixXd out(dims, static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
        for (Eigen::Index p = 0; p < dims; ++p) {
            // 53 high bits -> [0, 1), independent of the standard library's distributions
            const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            const double lo = space.lo()[static_cast<std::size_t>(p)], hi = space.hi()[static_cast<std::size_t>(p)];
            out(p, i) = lo + (hi - lo) * u;
        }
    }
    return out;
}

Eigen::MatrixXd node_parameters(const pgrid::ParameterSpace& space, const pgrid::CollocationGrid& grid) {
    if (grid.dims() != space.dims()) throw ValidationError("grid", "dimension does not match the parameter space");
    return space.from_reference(grid.nodes());
}

TrajectoryEnsemble run_reference(const models::Model& model, const Eigen::MatrixXd& params,
                                 const integrate::IntegratorConfig& config, std::size_t threads) {
    config.validate();
    if (static_cast<std::size_t>(params.rows()) != model.parameter_space().dims()) {
        throw ValidationError("samples", "parameter dimension does not match the model");
    }
    const auto f = model.dynamics();
    integrate::check_scheme(config.scheme, f.order);
    const Eigen::VectorXd phi0 = model.initial_state();
    auto ens = empty_ensemble(model, config, params, f.state_dim());
    std::mutex mutex;
    parallel_for(ens.n_samples(), threads, [&](std::size_t i) {
        Stepper stepper(f, params.col(static_cast<Eigen::Index>(i)), config.scheme, config.dt);
        Eigen::VectorXd state = phi0;
        auto& out = ens.states[i];
        try {
            for (std::size_t k = 0; k < ens.n_records(); ++k) {
                if (k > 0) stepper.advance(state, config.stride);
                out.col(static_cast<Eigen::Index>(k)) = state;
            }
        } catch (const IntegrationError& e) {
            std::lock_guard lock(mutex);
            ens.failures.push_back({i, e.step(), e.what()});
        }
    });
    sort_failures(ens.failures);
    return ens;
}

TrajectoryEnsemble run_state_sc(const TrajectoryEnsemble& nodes, const pgrid::InterpolationMatrix& gamma,
                                const Eigen::MatrixXd& sample_params) {
    require_intact(nodes);
    const auto& g = gamma.gamma;
    if (static_cast<std::size_t>(g.cols()) != nodes.n_samples()) {
        throw ValidationError("gamma", "column count does not match the number of node trajectories");
    }
    if (g.rows() != sample_params.cols()) throw ValidationError("samples", "count does not match gamma rows");
    TrajectoryEnsemble out;
    out.model = nodes.model;
    out.dt = nodes.dt;
    out.stride = nodes.stride;
    out.times = nodes.times;
    out.param_points = sample_params;
    const auto S = static_cast<Eigen::Index>(nodes.state_dim());
    const auto J = static_cast<Eigen::Index>(nodes.n_samples());
    const auto K = static_cast<Eigen::Index>(nodes.n_records());
    out.states.assign(static_cast<std::size_t>(g.rows()), Eigen::MatrixXd(S, K));
    Eigen::MatrixXd current(S, J);
    const Eigen::MatrixXd gt = g.transpose();
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index j = 0; j < J; ++j) current.col(j) = nodes.states[static_cast<std::size_t>(j)].col(k);
        const Eigen::MatrixXd samples = current * gt;
        for (Eigen::Index i = 0; i < samples.cols(); ++i) out.states[static_cast<std::size_t>(i)].col(k) = samples.col(i);
    }
    return out;
}

std::vector<std::pair<sindy::MonomialBasis, std::vector<std::size_t>>> make_blocks(const models::Model& model,
                                                                                    const SindyConfig& config) {
    const auto f = model.dynamics();
    std::vector<std::pair<sindy::MonomialBasis, std::vector<std::size_t>>> blocks;
    if (model.is_mesh() && config.local) {
        const std::size_t dofs = model.dofs_per_node();
        auto bases = sindy::local_bases(model.adjacency(), dofs, config.max_degree, config.basis_cap);
        if (bases.size() * dofs != f.dim) throw ValidationError("model", "adjacency does not cover the state");
        for (std::size_t n = 0; n < bases.size(); ++n) {
            std::vector<std::size_t> outputs(dofs);
            for (std::size_t d = 0; d < dofs; ++d) outputs[d] = n * dofs + d;
            blocks.emplace_back(std::move(bases[n]), std::move(outputs));
        }
    } else {
        std::vector<std::size_t> outputs(f.dim);
        for (std::size_t s = 0; s < f.dim; ++s) outputs[s] = s;
        blocks.emplace_back(sindy::build_basis(f.dim, config.max_degree, config.basis_cap), std::move(outputs));
    }
    return blocks;
}

std::size_t snapshot_budget(const models::Model& model, const SindyConfig& config) {
    if (config.snapshots > 0) return config.snapshots;
    std::size_t widest = 0;
    if (model.is_mesh() && config.local) {
        for (const auto& nbrs : model.adjacency()) {
            widest = std::max(widest, sindy::basis_size(nbrs.size() * model.dofs_per_node(), config.max_degree));
        }
    } else {
        widest = sindy::basis_size(model.dynamics().dim, config.max_degree);
    }
    return std::max<std::size_t>(2 * widest, 100);
}

surrogate::SurrogateDynamics learn_node_dynamics(const models::Model& model, const Eigen::VectorXd& params,
                                                 const Eigen::MatrixXd& snapshots, const SindyConfig& config,
                                                 const surrogate::SurrogateDynamics* warm_start) {
    config.validate();
    const auto f = model.dynamics();
    if (static_cast<std::size_t>(snapshots.rows()) != f.state_dim()) {
        throw ValidationError("snapshots", "row count does not match the model state");
    }
    if (snapshots.cols() < 2) throw ValidationError("snapshots", "need at least two snapshots");
    if (!snapshots.allFinite()) throw ValidationError("snapshots", "contain non-finite values");

    const auto dim = static_cast<Eigen::Index>(f.dim);
    const Eigen::MatrixXd inputs = f.order == integrate::Order::Second ? Eigen::MatrixXd(snapshots.topRows(dim))
                                                                      : snapshots;
    Eigen::MatrixXd rates(dim, inputs.cols());
    Eigen::VectorXd x, r;
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
        x = inputs.col(k);
        f.eval(x, params, r);
        rates.col(k) = r;
    }

    auto layout = make_blocks(model, config);
    if (warm_start && warm_start->blocks().size() != layout.size()) {
        throw ValidationError("warm_start", "block layout does not match");
    }
    const sindy::StlsOptions opts{config.max_rounds, config.scale_columns};
    std::vector<surrogate::Block> blocks;
    blocks.reserve(layout.size());
    for (std::size_t b = 0; b < layout.size(); ++b) {
        auto& [basis, outputs] = layout[b];
        Eigen::MatrixXd block_rates(static_cast<Eigen::Index>(outputs.size()), rates.cols());
        for (std::size_t o = 0; o < outputs.size(); ++o) {
            block_rates.row(static_cast<Eigen::Index>(o)) = rates.row(static_cast<Eigen::Index>(outputs[o]));
        }
        const auto data = sindy::RegressionData::with_strided_split(inputs, block_rates, config.validation_stride);

        std::vector<double> thresholds = config.sweep;
        if (thresholds.empty()) {
            const double warm_tau = warm_start ? warm_start->blocks()[b].threshold : 0.0;
            if (warm_tau > 0.0) {
                thresholds = sindy::log_sweep(warm_tau, std::pow(10.0, -2.5), std::pow(10.0, 2.5), config.sweep_count);
            } else {
                Eigen::MatrixXd train_x(inputs.rows(), static_cast<Eigen::Index>(data.train.size()));
                Eigen::MatrixXd train_r(block_rates.rows(), train_x.cols());
                for (std::size_t c = 0; c < data.train.size(); ++c) {
                    train_x.col(static_cast<Eigen::Index>(c)) = inputs.col(static_cast<Eigen::Index>(data.train[c]));
                    train_r.col(static_cast<Eigen::Index>(c)) = block_rates.col(static_cast<Eigen::Index>(data.train[c]));
                }
                const auto ols = sindy::least_squares(sindy::design_matrix(basis, train_x), train_r, config.scale_columns);
                double scale = sindy::coefficient_scale(ols);
                if (!(scale > 0.0)) scale = 1.0;  // all-zero rates; any positive sweep gives the zero model
                thresholds = sindy::log_sweep(scale, config.sweep_lo, config.sweep_hi, config.sweep_count);
            }
        }
        auto sel = sindy::select_threshold(data, basis, thresholds, opts);
        double residual = 0.0;
        for (const auto& p : sel.sweep) {
            if (p.threshold == sel.threshold) residual = p.residual;
        }
        blocks.push_back({std::move(basis), std::move(outputs), std::move(sel.coefficients), sel.threshold, residual});
    }
    return surrogate::SurrogateDynamics(f.order, f.dim, std::move(blocks), surrogate::Provenance::NodeLearned);
}

TrajectoryEnsemble integrate_surrogates(const models::Model& model,
                                        const std::vector<surrogate::SurrogateDynamics>& sample_models,
                                        const Eigen::MatrixXd& sample_params,
                                        const integrate::IntegratorConfig& integrator, std::size_t threads) {
    integrator.validate();
    if (static_cast<Eigen::Index>(sample_models.size()) != sample_params.cols()) {
        throw ValidationError("samples", "one surrogate per sample expected");
    }
    const Eigen::VectorXd phi0 = model.initial_state();
    auto ens = empty_ensemble(model, integrator, sample_params, static_cast<std::size_t>(phi0.size()));
    std::mutex mutex;
    parallel_for(sample_models.size(), threads, [&](std::size_t i) {
        const auto f = sample_models[i].as_dynamics();
        if (f.state_dim() != static_cast<std::size_t>(phi0.size())) {
            throw ValidationError("surrogate", "state dimension does not match the model");
        }
        Stepper stepper(f, Eigen::VectorXd(), integrator.scheme, integrator.dt);
        Eigen::VectorXd state = phi0;
        auto& out = ens.states[i];
        try {
            for (std::size_t k = 0; k < ens.n_records(); ++k) {
                if (k > 0) stepper.advance(state, integrator.stride);
                out.col(static_cast<Eigen::Index>(k)) = state;
            }
        } catch (const IntegrationError& e) {
            std::lock_guard lock(mutex);
            ens.failures.push_back({i, e.step(), std::string("surrogate diverged: ") + e.what()});
        }
    });
    sort_failures(ens.failures);
    return ens;
}

DynScResult run_dyn_sc_offline(const models::Model& model, const TrajectoryEnsemble& nodes,
                               const pgrid::InterpolationMatrix& gamma, const Eigen::MatrixXd& sample_params,
                               const SindyConfig& sindy, const integrate::IntegratorConfig& integrator,
                               std::size_t threads) {
    require_intact(nodes);
    sindy.validate();
    const auto& g = gamma.gamma;
    if (static_cast<std::size_t>(g.cols()) != nodes.n_samples()) {
        throw ValidationError("gamma", "column count does not match the number of node trajectories");
    }
    if (g.rows() != sample_params.cols()) throw ValidationError("samples", "count does not match gamma rows");
    const std::size_t window =
        sindy.offline_window > 0 ? std::min(sindy.offline_window, nodes.n_records()) : nodes.n_records();

    DynScResult result;
    result.node_models.resize(nodes.n_samples());
    parallel_for(nodes.n_samples(), threads, [&](std::size_t j) {
        result.node_models[j] =
            learn_node_dynamics(model, nodes.param_points.col(static_cast<Eigen::Index>(j)),
                                nodes.states[j].leftCols(static_cast<Eigen::Index>(window)), sindy);
    });
    std::vector<surrogate::SurrogateDynamics> sample_models(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        sample_models[static_cast<std::size_t>(i)] =
            surrogate::interpolate_coefficients(result.node_models, g.row(i).transpose());
    }
    result.ensemble = integrate_surrogates(model, sample_models, sample_params, integrator, threads);
    return result;
}

std::size_t LearningLog::relearn_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const LearningEvent& e) { return !e.initial; }));
}

std::string LearningLog::to_json() const {
    nlohmann::json j;
    auto& list = j["events"] = nlohmann::json::array();
    for (const auto& e : events) {
        list.push_back({{"record", e.record},
                        {"step", e.step},
                        {"time", e.time},
                        {"kind", e.initial ? "initial" : "relearn"},
                        {"snapshots_stored", e.snapshots_stored},
                        {"divergence", e.divergence},
                        {"residuals", e.residuals}});
    }
    j["relearn_count"] = relearn_count();
    return j.dump(2);
}

SemiOnlineResult run_dyn_sc_semionline(const models::Model& model, const pgrid::CollocationGrid& grid,
                                       const pgrid::InterpolationMatrix& gamma, const Eigen::MatrixXd& sample_params,
                                       const SindyConfig& sindy, const DivergenceMonitor& monitor,
                                       const integrate::IntegratorConfig& integrator, std::size_t threads) {
    sindy.validate();
    monitor.validate();
    integrator.validate();
    const auto f = model.dynamics();
    integrate::check_scheme(integrator.scheme, f.order);
    const auto& g = gamma.gamma;
    const std::size_t J = grid.size();
    const auto I = static_cast<std::size_t>(sample_params.cols());
    if (static_cast<std::size_t>(g.cols()) != J) throw ValidationError("gamma", "column count does not match the grid");
    if (static_cast<std::size_t>(g.rows()) != I) throw ValidationError("samples", "count does not match gamma rows");

    const std::size_t window = snapshot_budget(model, sindy);
    if (window < 2) throw ValidationError("sindy.snapshots", "must be >= 2");
    const Eigen::MatrixXd node_params = node_parameters(model.parameter_space(), grid);
    const Eigen::VectorXd phi0 = model.initial_state();
    const auto S = static_cast<Eigen::Index>(phi0.size());

    SemiOnlineResult result;
    result.nodes = empty_ensemble(model, integrator, node_params, phi0.size());
    result.ensemble = empty_ensemble(model, integrator, sample_params, phi0.size());
    const std::size_t last_record = result.nodes.n_records() - 1;
    const auto step_of = [&](std::size_t record) { return record * integrator.stride; };

    std::vector<Stepper> exact;
    exact.reserve(J);
    std::vector<Eigen::VectorXd> node_state(J, phi0);
    for (std::size_t j = 0; j < J; ++j) {
        exact.emplace_back(f, node_params.col(static_cast<Eigen::Index>(j)), integrator.scheme, integrator.dt);
        result.nodes.states[j].col(0) = phi0;
    }
    std::vector<Eigen::MatrixXd> stored(J, Eigen::MatrixXd(S, 0));
    std::size_t node_record = 0;

    std::vector<Eigen::VectorXd> sample_state(I, phi0);
    std::vector<bool> sample_alive(I, true);
    for (std::size_t i = 0; i < I; ++i) result.ensemble.states[i].col(0) = phi0;

    std::vector<Stepper> learned;       // per node, for the one-record prediction
    std::vector<Stepper> sample_steps;  // per sample
    auto& node_models = result.node_models;

    const auto advance_nodes_to = [&](std::size_t target) {
        parallel_for(J, threads, [&](std::size_t j) {
            for (std::size_t k = node_record + 1; k <= target; ++k) {
                exact[j].advance(node_state[j], integrator.stride);
                result.nodes.states[j].col(static_cast<Eigen::Index>(k)) = node_state[j];
            }
        });
        node_record = std::max(node_record, target);
    };

    const auto advance_samples = [&](std::size_t from, std::size_t to) {
        std::mutex mutex;
        parallel_for(I, threads, [&](std::size_t i) {
            if (!sample_alive[i]) return;
            try {
                for (std::size_t k = from + 1; k <= to; ++k) {
                    sample_steps[i].advance(sample_state[i], integrator.stride);
                    result.ensemble.states[i].col(static_cast<Eigen::Index>(k)) = sample_state[i];
                }
            } catch (const IntegrationError& e) {
                std::lock_guard lock(mutex);
                sample_alive[i] = false;
                result.ensemble.failures.push_back({i, e.step(), std::string("surrogate diverged: ") + e.what()});
            }
        });
    };

    // Re-interpolates the sample coefficients and restarts the sample steppers
    // at `record`.
    const auto rebuild_samples = [&](std::size_t record) {
        sample_steps.clear();
        for (std::size_t i = 0; i < I; ++i) {
            sample_steps.emplace_back(
                surrogate::interpolate_coefficients(node_models, g.row(static_cast<Eigen::Index>(i)).transpose())
                    .as_dynamics(),
                Eigen::VectorXd(), integrator.scheme, integrator.dt);
            sample_steps.back().set_step_count(step_of(record));
        }
    };

    // Samples stay at phi0 until the learned dynamics first passes a check.
    bool accepted = false;
    std::size_t sample_record = 0;

    // Learns from records first..last (already advanced) on every node.
    const auto learning_round = [&](std::size_t first, std::size_t last, std::vector<double> divergence) {
        const std::size_t count = last - first + 1;
        const std::size_t have = static_cast<std::size_t>(stored.front().cols());
        if (have + count > monitor.memory_budget) {
            std::vector<double> residuals;
            for (const auto& m : node_models) residuals.push_back(total_residual(m));
            const double worst = divergence.empty() ? 0.0 : *std::max_element(divergence.begin(), divergence.end());
            throw MemoryBudgetError("memory budget of " + std::to_string(monitor.memory_budget) +
                                        " snapshots per node exhausted at record " + std::to_string(first) +
                                        " before the learned dynamics converged (max divergence " +
                                        std::to_string(worst) + ")",
                                    std::move(residuals));
        }
        std::vector<surrogate::SurrogateDynamics> previous = node_models;
        node_models.resize(J);
        parallel_for(J, threads, [&](std::size_t j) {
            auto& mem = stored[j];
            mem.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(have + count));
            mem.rightCols(static_cast<Eigen::Index>(count)) =
                result.nodes.states[j].middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
            // A rejected model's threshold is no better a center than the default sweep.
            const surrogate::SurrogateDynamics* warm = !accepted || previous.empty() ? nullptr : &previous[j];
            node_models[j] = learn_node_dynamics(model, node_params.col(static_cast<Eigen::Index>(j)), mem, sindy, warm);
        });

        LearningEvent ev;
        ev.record = first;
        ev.step = step_of(first);
        ev.time = result.nodes.times[first];
        ev.initial = !accepted;
        ev.snapshots_stored = have + count;
        ev.divergence = std::move(divergence);
        for (const auto& m : node_models) ev.residuals.push_back(total_residual(m));
        result.log.events.push_back(std::move(ev));

        learned.clear();
        for (std::size_t j = 0; j < J; ++j) {
            learned.emplace_back(node_models[j].as_dynamics(), Eigen::VectorXd(), integrator.scheme, integrator.dt);
        }
        if (accepted) {
            rebuild_samples(sample_record);
            advance_samples(sample_record, last);
            sample_record = last;
        }
    };

    // Initial round on records 0..K'-1.
    std::size_t record = std::min(window - 1, last_record);
    advance_nodes_to(record);
    learning_round(0, record, {});

    std::vector<double> divergence(J);
    std::vector<char> flagged(J);
    while (record < last_record) {
        // One-record prediction from the exact state with the learned dynamics.
        parallel_for(J, threads, [&](std::size_t j) {
            Eigen::VectorXd predicted = node_state[j];
            try {
                learned[j].set_step_count(step_of(record));
                learned[j].advance(predicted, integrator.stride);
            } catch (const IntegrationError&) {
                predicted.setConstant(std::numeric_limits<double>::infinity());
            }
            exact[j].advance(node_state[j], integrator.stride);
            result.nodes.states[j].col(static_cast<Eigen::Index>(record + 1)) = node_state[j];
            divergence[j] = monitor.divergence(predicted, node_state[j]);
            flagged[j] = monitor.outdated(predicted, node_state[j]);
        });
        node_record = record + 1;
        if (std::none_of(flagged.begin(), flagged.end(), [](char c) { return c != 0; })) {
            if (!accepted) {
                accepted = true;
                rebuild_samples(0);
            }
            advance_samples(sample_record, record + 1);
            sample_record = ++record;
            continue;
        }
        const std::size_t first = record + 1;
        const std::size_t last = std::min(record + window, last_record);
        advance_nodes_to(last);
        learning_round(first, last, divergence);
        record = last;
    }
    if (!accepted) {
        // Horizon reached before any check passed: integrate with the last fit.
        rebuild_samples(0);
        advance_samples(0, last_record);
    }
    sort_failures(result.ensemble.failures);
    return result;
}

}  // namespace dynsc::propagate
