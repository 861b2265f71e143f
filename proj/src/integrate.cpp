#include "dynsc/integrate.hpp"

#include <algorithm>

#include "dynsc/error.hpp"

namespace dynsc::integrate {

namespace {

void check_finite(const Eigen::VectorXd& x, std::size_t step) {
    if (!x.allFinite()) throw IntegrationError(step, "non-finite state");
}

}  // namespace

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Euler: return "euler";
        case Scheme::RK4: return "rk4";
        case Scheme::Verlet: return "verlet";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "euler") return Scheme::Euler;
    if (s == "rk4") return Scheme::RK4;
    if (s == "verlet") return Scheme::Verlet;
    throw ValidationError("integrator.scheme", "unknown scheme '" + s + "'");
}

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ValidationError("integrator.dt", "must be > 0");
    if (n_steps < 1) throw ValidationError("integrator.n_steps", "must be >= 1");
    if (stride < 1) throw ValidationError("integrator.stride", "must be >= 1");
    if (n_steps % stride != 0) throw ValidationError("integrator.stride", "must divide n_steps");
}

void check_scheme(Scheme scheme, Order order) {
    const bool ok = (order == Order::Second) == (scheme == Scheme::Verlet);
    if (!ok) {
        throw ValidationError("integrator.scheme", "scheme '" + to_string(scheme) + "' does not apply to " +
                                                       (order == Order::First ? "first" : "second") + "-order dynamics");
    }
}

Eigen::VectorXd step_euler(const DynamicsFn& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& params, double dt,
                           std::size_t step_index) {
    check_scheme(Scheme::Euler, f.order);
    Eigen::VectorXd rate(phi.size());
    f.eval(phi, params, rate);
    Eigen::VectorXd out = phi + dt * rate;
    check_finite(out, step_index);
    return out;
}

Eigen::VectorXd step_rk4(const DynamicsFn& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& params, double dt,
                         std::size_t step_index) {
    check_scheme(Scheme::RK4, f.order);
    const auto n = phi.size();
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n);
    f.eval(phi, params, k1);
    f.eval(phi + 0.5 * dt * k1, params, k2);
    f.eval(phi + 0.5 * dt * k2, params, k3);
    f.eval(phi + dt * k3, params, k4);
    Eigen::VectorXd out = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(out, step_index);
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step_verlet(const DynamicsFn& a, const Eigen::VectorXd& u,
                                                        const Eigen::VectorXd& v, const Eigen::VectorXd& params,
                                                        double dt, std::size_t step_index) {
    check_scheme(Scheme::Verlet, a.order);
    Eigen::VectorXd acc(u.size());
    a.eval(u, params, acc);
    Eigen::VectorXd v_half = v + 0.5 * dt * acc;
    Eigen::VectorXd u_next = u + dt * v_half;
    a.eval(u_next, params, acc);
    Eigen::VectorXd v_next = v_half + 0.5 * dt * acc;
    check_finite(u_next, step_index);
    check_finite(v_next, step_index);
    return {std::move(u_next), std::move(v_next)};
}

Stepper::Stepper(const DynamicsFn& f, Eigen::VectorXd params, Scheme scheme, double dt)
    : f_(f), params_(std::move(params)), scheme_(scheme), dt_(dt) {
    check_scheme(scheme, f.order);
    const auto n = static_cast<Eigen::Index>(f.dim);
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    tmp_.resize(n);
    acc_.resize(n);
}

void Stepper::advance(Eigen::VectorXd& state, std::size_t steps) {
    if (steps == 0) return;
    const auto n = static_cast<Eigen::Index>(f_.dim);
    switch (scheme_) {
        case Scheme::Euler:
            for (std::size_t s = 0; s < steps; ++s) {
                f_.eval(state, params_, k1_);
                state += dt_ * k1_;
                check_finite(state, ++step_count_);
            }
            break;
        case Scheme::RK4:
            for (std::size_t s = 0; s < steps; ++s) {
                f_.eval(state, params_, k1_);
                tmp_ = state + 0.5 * dt_ * k1_;
                f_.eval(tmp_, params_, k2_);
                tmp_ = state + 0.5 * dt_ * k2_;
                f_.eval(tmp_, params_, k3_);
                tmp_ = state + dt_ * k3_;
                f_.eval(tmp_, params_, k4_);
                state += (dt_ / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
                check_finite(state, ++step_count_);
            }
            break;
        case Scheme::Verlet: {
            auto u = state.head(n);
            auto v = state.tail(n);
            tmp_ = u;
            f_.eval(tmp_, params_, acc_);
            for (std::size_t s = 0; s < steps; ++s) {
                v += (0.5 * dt_) * acc_;
                u += dt_ * v;
                tmp_ = u;
                f_.eval(tmp_, params_, acc_);
                v += (0.5 * dt_) * acc_;
                check_finite(state, ++step_count_);
            }
            break;
        }
    }
}

std::vector<double> record_times(const IntegratorConfig& config) {
    std::vector<double> t(config.n_records());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(k * config.stride) * config.dt;
    return t;
}

Trajectory integrate(const DynamicsFn& f, const Eigen::VectorXd& phi0, const Eigen::VectorXd& params,
                     const IntegratorConfig& config, const Observer& observer) {
    config.validate();
    if (static_cast<std::size_t>(phi0.size()) != f.state_dim()) {
        throw ValidationError("phi0", "length does not match the dynamics");
    }
    Trajectory traj;
    traj.times = record_times(config);
    traj.states.resize(phi0.size(), static_cast<Eigen::Index>(traj.times.size()));
    Stepper stepper(f, params, config.scheme, config.dt);
    Eigen::VectorXd state = phi0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (k > 0) stepper.advance(state, config.stride);
        traj.states.col(static_cast<Eigen::Index>(k)) = state;
        if (observer) observer(k, traj.times[k], state);
    }
    return traj;
}

bool TrajectoryEnsemble::failed(std::size_t sample) const {
    return std::any_of(failures.begin(), failures.end(), [&](const SampleFailure& f) { return f.sample == sample; });
}

}  // namespace dynsc::integrate
