#pragma once

// Fixed-step explicit time integration and trajectory containers.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dynsc::integrate {

enum class Order { First, Second };
enum class Scheme { Euler, RK4, Verlet };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

using RateFn = std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& params, Eigen::VectorXd& out)>;

/// Right-hand side of a first-order system (rate of the full state), or the
/// acceleration of a second-order system as a function of displacement.
/// `dim` is the state dimension (first order) or displacement dimension
/// (second order); the integrated state of a second-order system is [u; v].
struct DynamicsFn {
    Order order = Order::First;
    std::size_t dim = 0;
    RateFn eval;

    std::size_t state_dim() const { return order == Order::First ? dim : 2 * dim; }
};

Eigen::VectorXd step_euler(const DynamicsFn& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& params, double dt,
                           std::size_t step_index = 0);
Eigen::VectorXd step_rk4(const DynamicsFn& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& params, double dt,
                         std::size_t step_index = 0);
/// Velocity Verlet: v+ = v + dt/2 a(u); u' = u + dt v+; v' = v+ + dt/2 a(u').
std::pair<Eigen::VectorXd, Eigen::VectorXd> step_verlet(const DynamicsFn& a, const Eigen::VectorXd& u,
                                                        const Eigen::VectorXd& v, const Eigen::VectorXd& params,
                                                        double dt, std::size_t step_index = 0);

struct IntegratorConfig {
    Scheme scheme = Scheme::RK4;
    double dt = 1e-3;
    std::size_t n_steps = 1000;
    std::size_t stride = 1;

    std::size_t n_records() const { return n_steps / stride + 1; }
    /// Throws ValidationError on dt <= 0, zero steps/stride, or n_steps not a multiple of stride.
    void validate() const;
};

/// Throws ValidationError if the scheme does not apply to the dynamics order.
void check_scheme(Scheme scheme, Order order);

/// Advances a state by whole integrator steps. Keeps the global step count so
/// errors carry the absolute step index.
class Stepper {
public:
    Stepper(const DynamicsFn& f, Eigen::VectorXd params, Scheme scheme, double dt);

    /// Advances `state` by `steps` steps; throws IntegrationError on non-finite values.
    void advance(Eigen::VectorXd& state, std::size_t steps);
    std::size_t steps_taken() const noexcept { return step_count_; }
    void set_step_count(std::size_t n) noexcept { step_count_ = n; }

private:
    DynamicsFn f_;
    Eigen::VectorXd params_;
    Scheme scheme_;
    double dt_;
    std::size_t step_count_ = 0;
    Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_, acc_;
};

using Observer = std::function<void(std::size_t record, double time, const Eigen::VectorXd& state)>;

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd states;  // state_dim x n_records
};

/// Records the state at steps 0, stride, 2 stride, ..., n_steps and calls the
/// observer after each record.
Trajectory integrate(const DynamicsFn& f, const Eigen::VectorXd& phi0, const Eigen::VectorXd& params,
                     const IntegratorConfig& config, const Observer& observer = {});

std::vector<double> record_times(const IntegratorConfig& config);

struct SampleFailure {
    std::size_t sample = 0;
    std::size_t step = 0;
    std::string message;
};

/// Trajectories for a set of parameter points on a shared time grid.
struct TrajectoryEnsemble {
    std::string model;
    double dt = 0.0;
    std::size_t stride = 1;
    std::vector<double> times;
    Eigen::MatrixXd param_points;          // P x I, model units
    std::vector<Eigen::MatrixXd> states;   // I entries of state_dim x n_records
    std::vector<SampleFailure> failures;   // failed samples hold NaN after the failure

    std::size_t n_samples() const { return states.size(); }
    std::size_t n_records() const { return times.size(); }
    std::size_t state_dim() const { return states.empty() ? 0 : static_cast<std::size_t>(states.front().rows()); }
    bool failed(std::size_t sample) const;
};

}  // namespace dynsc::integrate
