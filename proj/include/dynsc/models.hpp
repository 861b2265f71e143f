#pragma once

// Built-in benchmark systems with exact dynamics.

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynsc/integrate.hpp"
#include "dynsc/pgrid.hpp"

namespace dynsc::models {

using Adjacency = std::vector<std::vector<std::size_t>>;

class Model {
public:
    virtual ~Model() = default;

    virtual std::string id() const = 0;
    virtual const pgrid::ParameterSpace& parameter_space() const = 0;
    virtual std::vector<std::string> parameter_names() const = 0;
    virtual integrate::DynamicsFn dynamics() const = 0;
    /// Full integrated state at t = 0 ([u; v] for second-order models).
    virtual Eigen::VectorXd initial_state() const = 0;

    virtual bool is_mesh() const { return false; }
    /// Per-node neighbor lists including the node itself. Throws for ODE models.
    virtual Adjacency adjacency() const;
    virtual std::size_t dofs_per_node() const { return 1; }
};

/// (x', y', z') for the Lorenz system with params (rho, sigma, beta).
Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& phi, const Eigen::Vector3d& params);

class LorenzModel final : public Model {
public:
    /// Nominal (28, 10, 8/3) with +-5% uniform bounds.
    LorenzModel();
    LorenzModel(pgrid::ParameterSpace space, Eigen::Vector3d initial);

    std::string id() const override { return "lorenz"; }
    const pgrid::ParameterSpace& parameter_space() const override { return space_; }
    std::vector<std::string> parameter_names() const override { return {"rho", "sigma", "beta"}; }
    integrate::DynamicsFn dynamics() const override;
    Eigen::VectorXd initial_state() const override { return initial_; }

private:
    pgrid::ParameterSpace space_;
    Eigen::Vector3d initial_;
};

/// phi' = lambda * phi.
class LinearModel final : public Model {
public:
    LinearModel();
    LinearModel(pgrid::ParameterSpace space, double initial);

    std::string id() const override { return "linear"; }
    const pgrid::ParameterSpace& parameter_space() const override { return space_; }
    std::vector<std::string> parameter_names() const override { return {"lambda"}; }
    integrate::DynamicsFn dynamics() const override;
    Eigen::VectorXd initial_state() const override { return Eigen::VectorXd::Constant(1, initial_); }

private:
    pgrid::ParameterSpace space_;
    double initial_;
};

struct BarConfig {
    std::size_t n_elements = 100;
    double length = 2.0;
    double density = 1.0;
    double v0 = 1.0;
    std::array<double, 2> eps1 = {0.95, 1.05};
    std::array<double, 2> eps2 = {0.95, 1.05};
    /// When false both ends are traction free (all n_elements + 1 nodes move).
    bool fixed_right = true;
};

struct MechState {
    Eigen::VectorXd u;
    Eigen::VectorXd v;

    Eigen::VectorXd stacked() const;
};

/// 1D bar with stress eps1 * g * (1 + eps2 * g^2), linear elements and lumped
/// mass. Node k sits at X = k h; the right node is removed when fixed.
class BarModel final : public Model {
public:
    explicit BarModel(BarConfig config = {});

    std::string id() const override { return "bar"; }
    const pgrid::ParameterSpace& parameter_space() const override { return space_; }
    std::vector<std::string> parameter_names() const override { return {"eps1", "eps2"}; }
    integrate::DynamicsFn dynamics() const override;
    Eigen::VectorXd initial_state() const override { return bar_initial_state().stacked(); }

    bool is_mesh() const override { return true; }
    Adjacency adjacency() const override;

    const BarConfig& config() const noexcept { return config_; }
    std::size_t free_nodes() const noexcept { return free_nodes_; }
    double element_length() const noexcept { return h_; }
    const Eigen::VectorXd& lumped_mass() const noexcept { return mass_; }
    Eigen::VectorXd node_coordinates() const;

    /// f_n = sigma(right element) - sigma(left element).
    void internal_force(const Eigen::VectorXd& u, const Eigen::VectorXd& params, Eigen::VectorXd& f) const;
    Eigen::VectorXd internal_force(const Eigen::VectorXd& u, const Eigen::VectorXd& params) const;
    void accel(const Eigen::VectorXd& u, const Eigen::VectorXd& params, Eigen::VectorXd& a) const;
    Eigen::VectorXd accel(const Eigen::VectorXd& u, const Eigen::VectorXd& params) const;
    MechState bar_initial_state() const;

    /// Total energy: kinetic plus the stored energy eps1 (g^2/2 + eps2 g^4/4) h per element.
    double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& params) const;

private:
    BarConfig config_;
    pgrid::ParameterSpace space_;
    std::size_t free_nodes_;
    double h_;
    Eigen::VectorXd mass_;
};

}  // namespace dynsc::models
