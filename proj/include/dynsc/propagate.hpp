#pragma once

// Forward propagation pipelines: Monte Carlo reference, stochastic
// collocation over states, and stochastic collocation over learned dynamics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynsc/error.hpp"
#include "dynsc/integrate.hpp"
#include "dynsc/models.hpp"
#include "dynsc/pgrid.hpp"
#include "dynsc/surrogate.hpp"

namespace dynsc::propagate {

/// Regression and divergence-monitor settings for Dynamics SC.
struct SindyConfig {
    int max_degree = 2;
    /// Explicit thresholds; empty means a log sweep scaled by the OLS fit.
    std::vector<double> sweep;
    std::size_t sweep_count = 16;
    double sweep_lo = 1e-4;
    double sweep_hi = 1e1;
    /// Every n-th snapshot is held out for threshold selection.
    std::size_t validation_stride = 5;
    int max_rounds = 10;
    bool scale_columns = true;
    /// Use per-mesh-node bases for mesh models.
    bool local = true;
    /// Snapshots per learning round (K'); 0 selects max(2B, 100).
    std::size_t snapshots = 0;
    /// Records used by offline learning; 0 uses the whole node trajectory.
    std::size_t offline_window = 0;
    std::size_t basis_cap = 1'000'000;

    void validate() const;
};

/// Flags learned dynamics as outdated when a one-record prediction from the
/// exact state misses the exact step by at least max(tau_abs, tau_rel ||exact||).
/// A zero miss never flags, so a model checked against itself never relearns.
struct DivergenceMonitor {
    double tau_abs = 1e-6;
    double tau_rel = 1e-6;
    /// Snapshots a node may store across learning rounds.
    std::size_t memory_budget = 500;

    void validate() const;
    double divergence(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) const;
    bool outdated(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) const;
};

/// I i.i.d. uniform points in the box (P x I), deterministic under `seed`.
Eigen::MatrixXd sample_parameters(const pgrid::ParameterSpace& space, std::size_t count, std::uint64_t seed);

/// Grid nodes mapped to model units (P x J).
Eigen::MatrixXd node_parameters(const pgrid::ParameterSpace& space, const pgrid::CollocationGrid& grid);

/// Exact trajectories for each parameter column. Failed samples are recorded
/// and filled with NaN; the remaining samples still run.
integrate::TrajectoryEnsemble run_reference(const models::Model& model, const Eigen::MatrixXd& params,
                                            const integrate::IntegratorConfig& config, std::size_t threads = 1);

/// phi_i(t) = sum_j gamma_ij phi_j(t), one record at a time.
integrate::TrajectoryEnsemble run_state_sc(const integrate::TrajectoryEnsemble& nodes,
                                           const pgrid::InterpolationMatrix& gamma,
                                           const Eigen::MatrixXd& sample_params);

/// Sparse dynamics learned from snapshot columns of the integrated state
/// (S x K). For second-order models only the displacement half enters the
/// basis and the target is the acceleration.
surrogate::SurrogateDynamics learn_node_dynamics(const models::Model& model, const Eigen::VectorXd& params,
                                                 const Eigen::MatrixXd& snapshots, const SindyConfig& config,
                                                 const surrogate::SurrogateDynamics* warm_start = nullptr);

/// Global basis, or per-node local bases for mesh models with `local` set.
std::vector<std::pair<sindy::MonomialBasis, std::vector<std::size_t>>> make_blocks(const models::Model& model,
                                                                                    const SindyConfig& config);

/// K' after resolving the default.
std::size_t snapshot_budget(const models::Model& model, const SindyConfig& config);

struct DynScResult {
    integrate::TrajectoryEnsemble ensemble;
    std::vector<surrogate::SurrogateDynamics> node_models;
};

/// Offline Dynamics SC: learn per collocation node from the first K'
/// recorded snapshots of the node trajectories, interpolate coefficients per
/// sample and integrate the surrogates.
DynScResult run_dyn_sc_offline(const models::Model& model, const integrate::TrajectoryEnsemble& nodes,
                               const pgrid::InterpolationMatrix& gamma, const Eigen::MatrixXd& sample_params,
                               const SindyConfig& sindy, const integrate::IntegratorConfig& integrator,
                               std::size_t threads = 1);

/// Integrates one surrogate per sample; failures are recorded per sample.
integrate::TrajectoryEnsemble integrate_surrogates(const models::Model& model,
                                                   const std::vector<surrogate::SurrogateDynamics>& sample_models,
                                                   const Eigen::MatrixXd& sample_params,
                                                   const integrate::IntegratorConfig& integrator,
                                                   std::size_t threads = 1);

struct LearningEvent {
    std::size_t record = 0;          // first record whose snapshot the round collected
    std::size_t step = 0;            // integrator step of that record
    double time = 0.0;
    bool initial = true;             // before the learned dynamics was first accepted
    std::size_t snapshots_stored = 0;
    std::vector<double> divergence;  // per node, at the triggering check
    std::vector<double> residuals;   // per node validation residual after fitting
};

struct LearningLog {
    std::vector<LearningEvent> events;

    std::size_t relearn_count() const;
    std::string to_json() const;
};

class MemoryBudgetError : public Error {
public:
    MemoryBudgetError(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

struct SemiOnlineResult {
    integrate::TrajectoryEnsemble ensemble;
    integrate::TrajectoryEnsemble nodes;
    LearningLog log;
    std::vector<surrogate::SurrogateDynamics> node_models;
};

/// Semi-online Dynamics SC. The first round learns from records
/// 0..K'-1 unconditionally. Afterwards node trajectories advance exactly one
/// record at a time and each node's learned one-record prediction is checked
/// by the monitor; a flag starts a round that collects K' snapshots from the
/// next record on and refits every node on all stored snapshots. Samples start
/// from phi0 once a check first passes; later rounds re-interpolate the sample
/// coefficients and advance the samples to the node record.
SemiOnlineResult run_dyn_sc_semionline(const models::Model& model, const pgrid::CollocationGrid& grid,
                                       const pgrid::InterpolationMatrix& gamma, const Eigen::MatrixXd& sample_params,
                                       const SindyConfig& sindy, const DivergenceMonitor& monitor,
                                       const integrate::IntegratorConfig& integrator, std::size_t threads = 1);

/// Runs fn(0..count-1) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace dynsc::propagate
