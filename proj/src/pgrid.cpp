#include "dynsc/pgrid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <json.hpp>

#include "dynsc/error.hpp"

namespace dynsc::pgrid {

namespace {

constexpr double kSnapTol = 1e-15;
constexpr double kCubeTol = 1e-12;

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<double> smolyak_axis(int index) {
    if (index == 0) return {0.0};
    return cc_nodes_1d(index);
}

// All multi-indices of length `dims` with entries >= 0 and lo <= |l|_1 <= hi,
// in lexicographic order.
void enumerate_levels(std::size_t dims, int lo, int hi, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out) {
    int used = 0;
    for (int v : cur) used += v;
    if (cur.size() == dims) {
        if (used >= lo && used <= hi) out.push_back(cur);
        return;
    }
    for (int v = 0; used + v <= hi; ++v) {
        cur.push_back(v);
        enumerate_levels(dims, lo, hi, cur, out);
        cur.pop_back();
    }
}

}  // namespace

ParameterSpace::ParameterSpace(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.empty()) throw ValidationError("parameter_space", "need at least one dimension");
    if (lo_.size() != hi_.size()) throw ValidationError("parameter_space", "lo/hi length mismatch");
    for (std::size_t p = 0; p < lo_.size(); ++p) {
        if (!(lo_[p] < hi_[p]) || !std::isfinite(lo_[p]) || !std::isfinite(hi_[p])) {
            throw ValidationError("parameter_space", "require lo < hi in dimension " + std::to_string(p));
        }
    }
}

Eigen::VectorXd ParameterSpace::to_reference(std::span<const double> lambda) const {
    if (lambda.size() != dims()) throw ValidationError("lambda", "dimension mismatch");
    Eigen::VectorXd xi(dims());
    for (std::size_t p = 0; p < dims(); ++p) {
        const double half = 0.5 * (hi_[p] - lo_[p]);
        const double tol = kCubeTol * half;
        if (lambda[p] < lo_[p] - tol || lambda[p] > hi_[p] + tol) {
            throw ValidationError("lambda", "component " + std::to_string(p) + " outside parameter bounds");
        }
        const double mid = 0.5 * (hi_[p] + lo_[p]);
        xi[p] = std::clamp((lambda[p] - mid) / half, -1.0, 1.0);
    }
    return xi;
}

Eigen::VectorXd ParameterSpace::from_reference(std::span<const double> xi) const {
    if (xi.size() != dims()) throw ValidationError("xi", "dimension mismatch");
    Eigen::VectorXd lambda(dims());
    for (std::size_t p = 0; p < dims(); ++p) {
        if (std::abs(xi[p]) > 1.0 + kCubeTol) {
            throw ValidationError("xi", "component " + std::to_string(p) + " outside [-1, 1]");
        }
        const double half = 0.5 * (hi_[p] - lo_[p]);
        const double mid = 0.5 * (hi_[p] + lo_[p]);
        lambda[p] = mid + half * std::clamp(xi[p], -1.0, 1.0);
    }
    return lambda;
}

Eigen::MatrixXd ParameterSpace::to_reference(const Eigen::MatrixXd& lambdas) const {
    Eigen::MatrixXd out(lambdas.rows(), lambdas.cols());
    for (Eigen::Index i = 0; i < lambdas.cols(); ++i) {
        Eigen::VectorXd col = lambdas.col(i);
        out.col(i) = to_reference(std::span<const double>(col.data(), col.size()));
    }
    return out;
}

Eigen::MatrixXd ParameterSpace::from_reference(const Eigen::MatrixXd& xis) const {
    Eigen::MatrixXd out(xis.rows(), xis.cols());
    for (Eigen::Index i = 0; i < xis.cols(); ++i) {
        Eigen::VectorXd col = xis.col(i);
        out.col(i) = from_reference(std::span<const double>(col.data(), col.size()));
    }
    return out;
}

std::vector<double> cc_nodes_1d(int level) {
    if (level < 0) throw ValidationError("level", "must be >= 0");
    if (level > 30) throw ValidationError("level", "too large");
    const std::size_t n = (std::size_t{1} << level) + 1;
    const double denom = static_cast<double>(n - 1);
    std::vector<double> nodes(n);
    for (std::size_t j = 0; j < n; ++j) {
        double v = std::cos(static_cast<double>(j) * std::numbers::pi / denom);
        if (std::abs(v) < kSnapTol) v = 0.0;
        if (std::abs(v - 1.0) < kSnapTol) v = 1.0;
        if (std::abs(v + 1.0) < kSnapTol) v = -1.0;
        nodes[j] = v;
    }
    // The cosine of symmetric angles is not bitwise antisymmetric; enforce it
    // so nested levels share exactly the same values.
    for (std::size_t j = 0; j < n / 2; ++j) nodes[n - 1 - j] = -nodes[j];
    return nodes;
}

double lagrange_eval(std::span<const double> nodes, std::size_t j, double x) {
    if (j >= nodes.size()) throw ValidationError("j", "node index out of range");
    double value = 1.0;
    const double xj = nodes[j];
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (k == j) continue;
        const double d = xj - nodes[k];
        if (d == 0.0) throw ValidationError("nodes", "duplicate interpolation nodes");
        value *= (x - nodes[k]) / d;
    }
    return value;
}

std::string to_string(GridKind kind) { return kind == GridKind::Tensor ? "tensor" : "sparse"; }

GridKind grid_kind_from_string(const std::string& s) {
    if (s == "tensor") return GridKind::Tensor;
    if (s == "sparse") return GridKind::Sparse;
    throw ValidationError("grid.kind", "expected 'tensor' or 'sparse', got '" + s + "'");
}

CollocationGrid::CollocationGrid(std::size_t dims, GridKind kind, int order, std::vector<ComponentGrid> comps)
    : dims_(dims), kind_(kind), order_(order), components_(std::move(comps)) {
    std::map<std::vector<double>, std::size_t> index_of;
    std::vector<std::vector<double>> points;

    for (const auto& spec : components_) {
        if (spec.levels.size() != dims_) throw ValidationError("grid.combination", "level vector has wrong length");
        Component term;
        term.spec = spec;
        std::size_t count = 1;
        for (int l : spec.levels) {
            if (l < 0) throw ValidationError("grid.combination", "negative level");
            term.axes.push_back(kind_ == GridKind::Tensor ? cc_nodes_1d(l) : smolyak_axis(l));
            count *= term.axes.back().size();
        }
        term.node_index.resize(count);
        std::vector<std::size_t> idx(dims_, 0);
        std::vector<double> pt(dims_);
        for (std::size_t flat = 0; flat < count; ++flat) {
            for (std::size_t p = 0; p < dims_; ++p) pt[p] = term.axes[p][idx[p]];
            auto [it, inserted] = index_of.try_emplace(pt, points.size());
            if (inserted) points.push_back(pt);
            term.node_index[flat] = it->second;
            // Last dimension varies fastest.
            for (std::size_t p = dims_; p-- > 0;) {
                if (++idx[p] < term.axes[p].size()) break;
                idx[p] = 0;
            }
        }
        terms_.push_back(std::move(term));
    }

    nodes_.resize(static_cast<Eigen::Index>(dims_), static_cast<Eigen::Index>(points.size()));
    for (std::size_t j = 0; j < points.size(); ++j) {
        for (std::size_t p = 0; p < dims_; ++p) nodes_(p, j) = points[j][p];
    }
}

CollocationGrid CollocationGrid::tensor(std::vector<int> levels) {
    if (levels.empty()) throw ValidationError("grid.levels", "need at least one dimension");
    const int order = *std::max_element(levels.begin(), levels.end());
    const std::size_t dims = levels.size();
    return CollocationGrid(dims, GridKind::Tensor, order, {ComponentGrid{std::move(levels), 1}});
}

CollocationGrid CollocationGrid::sparse(std::size_t dims, int order) {
    if (dims < 1) throw ValidationError("grid.dims", "must be >= 1");
    if (order < 1) throw ValidationError("grid.order", "must be >= 1");
    const int p = static_cast<int>(dims);
    std::vector<std::vector<int>> all;
    std::vector<int> cur;
    enumerate_levels(dims, std::max(0, order - p + 1), order, cur, all);
    std::vector<ComponentGrid> comps;
    for (auto& levels : all) {
        int total = 0;
        for (int v : levels) total += v;
        const int gap = order - total;
        const long long c = binomial(p - 1, gap) * ((gap % 2 == 0) ? 1 : -1);
        if (c != 0) comps.push_back({std::move(levels), static_cast<int>(c)});
    }
    return CollocationGrid(dims, GridKind::Sparse, order, std::move(comps));
}

Eigen::VectorXd CollocationGrid::weights(std::span<const double> x) const {
    if (x.size() != dims_) throw ValidationError("sample", "dimension mismatch");
    for (std::size_t p = 0; p < dims_; ++p) {
        if (!(std::abs(x[p]) <= 1.0 + kCubeTol)) {
            throw ValidationError("sample", "coordinate " + std::to_string(p) + " outside [-1, 1]");
        }
    }
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    std::vector<std::vector<double>> basis(dims_);
    for (const auto& term : terms_) {
        for (std::size_t p = 0; p < dims_; ++p) {
            const auto& axis = term.axes[p];
            basis[p].resize(axis.size());
            for (std::size_t k = 0; k < axis.size(); ++k) basis[p][k] = lagrange_eval(axis, k, x[p]);
        }
        std::vector<std::size_t> idx(dims_, 0);
        for (std::size_t flat = 0; flat < term.node_index.size(); ++flat) {
            double w = static_cast<double>(term.spec.weight);
            for (std::size_t p = 0; p < dims_; ++p) w *= basis[p][idx[p]];
            gamma[static_cast<Eigen::Index>(term.node_index[flat])] += w;
            for (std::size_t p = dims_; p-- > 0;) {
                if (++idx[p] < term.axes[p].size()) break;
                idx[p] = 0;
            }
        }
    }
    return gamma;
}

std::string CollocationGrid::to_json() const {
    nlohmann::json j;
    j["dims"] = dims_;
    j["kind"] = to_string(kind_);
    j["order"] = order_;
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (Eigen::Index c = 0; c < nodes_.cols(); ++c) {
        std::vector<double> pt(nodes_.col(c).data(), nodes_.col(c).data() + nodes_.rows());
        nodes.push_back(pt);
    }
    auto& comb = j["combination"] = nlohmann::json::array();
    for (const auto& c : components_) comb.push_back({{"levels", c.levels}, {"weight", c.weight}});
    return j.dump();
}

CollocationGrid CollocationGrid::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    std::vector<ComponentGrid> comps;
    for (const auto& c : j.at("combination")) {
        comps.push_back({c.at("levels").get<std::vector<int>>(), c.at("weight").get<int>()});
    }
    CollocationGrid grid(j.at("dims").get<std::size_t>(), grid_kind_from_string(j.at("kind").get<std::string>()),
                         j.at("order").get<int>(), std::move(comps));
    if (j.contains("nodes") && j.at("nodes").size() != grid.size()) {
        throw ValidationError("grid.nodes", "node count does not match the combination");
    }
    return grid;
}

InterpolationMatrix interpolation_matrix(const CollocationGrid& grid, const Eigen::MatrixXd& samples) {
    if (static_cast<std::size_t>(samples.rows()) != grid.dims()) {
        throw ValidationError("samples", "expected " + std::to_string(grid.dims()) + " rows");
    }
    InterpolationMatrix out;
    out.sample_points = samples;
    out.gamma.resize(samples.cols(), static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        Eigen::VectorXd x = samples.col(i);
        out.gamma.row(i) = grid.weights(std::span<const double>(x.data(), x.size())).transpose();
    }
    return out;
}

}  // namespace dynsc::pgrid
