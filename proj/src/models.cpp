#include "dynsc/models.hpp"

#include "dynsc/error.hpp"

namespace dynsc::models {

Adjacency Model::adjacency() const {
    throw ValidationError("model", "'" + id() + "' has no mesh adjacency");
}

Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& phi, const Eigen::Vector3d& params) {
    const double rho = params[0], sigma = params[1], beta = params[2];
    const double x = phi[0], y = phi[1], z = phi[2];
    return {sigma * (y - x), x * (rho - z) - y, x * y - beta * z};
}

LorenzModel::LorenzModel()
    : LorenzModel(pgrid::ParameterSpace({28.0 - 7.0 / 5.0, 10.0 - 0.5, 8.0 / 3.0 - 2.0 / 15.0},
                                        {28.0 + 7.0 / 5.0, 10.0 + 0.5, 8.0 / 3.0 + 2.0 / 15.0}),
                  Eigen::Vector3d(1.0, 1.0, 1.0)) {}

LorenzModel::LorenzModel(pgrid::ParameterSpace space, Eigen::Vector3d initial)
    : space_(std::move(space)), initial_(std::move(initial)) {
    if (space_.dims() != 3) throw ValidationError("parameter_space", "lorenz needs 3 parameters");
}

integrate::DynamicsFn LorenzModel::dynamics() const {
    return {integrate::Order::First, 3, [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& out) {
                const double rho = p[0], sigma = p[1], beta = p[2];
                out.resize(3);
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }};
}

LinearModel::LinearModel() : LinearModel(pgrid::ParameterSpace({0.5}, {1.5}), 1.0) {}

LinearModel::LinearModel(pgrid::ParameterSpace space, double initial) : space_(std::move(space)), initial_(initial) {
    if (space_.dims() != 1) throw ValidationError("parameter_space", "linear model needs 1 parameter");
}

integrate::DynamicsFn LinearModel::dynamics() const {
    return {integrate::Order::First, 1, [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& out) {
                out.resize(1);
                out[0] = p[0] * x[0];
            }};
}

Eigen::VectorXd MechState::stacked() const {
    Eigen::VectorXd out(u.size() + v.size());
    out << u, v;
    return out;
}

BarModel::BarModel(BarConfig config)
    : config_(config),
      space_({config.eps1[0], config.eps2[0]}, {config.eps1[1], config.eps2[1]}),
      free_nodes_(config.fixed_right ? config.n_elements : config.n_elements + 1),
      h_(config.length / static_cast<double>(config.n_elements)) {
    if (config_.n_elements < 2) throw ValidationError("model.n_elements", "must be >= 2");
    if (!(config_.length > 0.0)) throw ValidationError("model.length", "must be > 0");
    if (!(config_.density > 0.0)) throw ValidationError("model.density", "must be > 0");
    mass_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(free_nodes_), config_.density * h_);
    mass_[0] = 0.5 * config_.density * h_;
    if (!config_.fixed_right) mass_[mass_.size() - 1] = 0.5 * config_.density * h_;
}

Eigen::VectorXd BarModel::node_coordinates() const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(free_nodes_));
    for (std::size_t k = 0; k < free_nodes_; ++k) x[static_cast<Eigen::Index>(k)] = static_cast<double>(k) * h_;
    return x;
}

void BarModel::internal_force(const Eigen::VectorXd& u, const Eigen::VectorXd& params, Eigen::VectorXd& f) const {
    const auto n = static_cast<Eigen::Index>(free_nodes_);
    if (u.size() != n) throw ValidationError("u", "expected one displacement per free node");
    const double e1 = params[0], e2 = params[1];
    const double inv_h = 1.0 / h_;
    f.resize(n);
    f.setZero();
    const auto elements = static_cast<Eigen::Index>(config_.n_elements);
    for (Eigen::Index e = 0; e < elements; ++e) {
        const double right = (e + 1 < n) ? u[e + 1] : 0.0;  // fixed node has u = 0
        const double g = (right - u[e]) * inv_h;
        const double s = e1 * g * (1.0 + e2 * g * g);
        f[e] += s;
        if (e + 1 < n) f[e + 1] -= s;
    }
}

Eigen::VectorXd BarModel::internal_force(const Eigen::VectorXd& u, const Eigen::VectorXd& params) const {
    Eigen::VectorXd f;
    internal_force(u, params, f);
    return f;
}

void BarModel::accel(const Eigen::VectorXd& u, const Eigen::VectorXd& params, Eigen::VectorXd& a) const {
    internal_force(u, params, a);
    a.array() /= mass_.array();
}

Eigen::VectorXd BarModel::accel(const Eigen::VectorXd& u, const Eigen::VectorXd& params) const {
    Eigen::VectorXd a;
    accel(u, params, a);
    return a;
}

integrate::DynamicsFn BarModel::dynamics() const {
    return {integrate::Order::Second, free_nodes_,
            [model = *this](const Eigen::VectorXd& u, const Eigen::VectorXd& p, Eigen::VectorXd& out) {
                model.accel(u, p, out);
            }};
}

MechState BarModel::bar_initial_state() const {
    const auto n = static_cast<Eigen::Index>(free_nodes_);
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, config_.v0)};
}

Adjacency BarModel::adjacency() const {
    Adjacency adj(free_nodes_);
    for (std::size_t k = 0; k < free_nodes_; ++k) {
        if (k > 0) adj[k].push_back(k - 1);
        adj[k].push_back(k);
        if (k + 1 < free_nodes_) adj[k].push_back(k + 1);
    }
    return adj;
}

double BarModel::energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& params) const {
    const double e1 = params[0], e2 = params[1];
    double kinetic = 0.5 * (mass_.array() * v.array().square()).sum();
    double stored = 0.0;
    const auto n = static_cast<Eigen::Index>(free_nodes_);
    for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(config_.n_elements); ++e) {
        const double right = (e + 1 < n) ? u[e + 1] : 0.0;
        const double g = (right - u[e]) / h_;
        stored += e1 * (0.5 * g * g + 0.25 * e2 * g * g * g * g) * h_;
    }
    return kinetic + stored;
}

}  // namespace dynsc::models
