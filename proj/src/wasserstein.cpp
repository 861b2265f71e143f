#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dynsc/error.hpp"
#include "dynsc/metrics.hpp"

namespace dynsc::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxGeneralSize = 4096;

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd d(a.cols(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) d(i, j) = (a.col(i) - b.col(j)).norm();
    }
    return d;
}

bool uniform_weights(const EmpiricalDistribution& d) {
    const double w = 1.0 / static_cast<double>(d.size());
    return ((d.weights.array() - w).abs() <= 1e-14).all();
}

// Successive shortest paths on the bipartite transportation network, with
// Dijkstra over reduced costs. Dense, O((n + m)^2) per augmentation.
double transport_cost(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
    const auto n = static_cast<std::size_t>(cost.rows());
    const auto m = static_cast<std::size_t>(cost.cols());
    const double eps = 1e-15;
    std::vector<double> supply_left(supply.data(), supply.data() + n);
    std::vector<double> demand_left(demand.data(), demand.data() + m);
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
    // Potentials for sources, sinks and the super sink; the super source keeps 0.
    std::vector<double> pot_src(n, 0.0), pot_snk(m, 0.0);
    double pot_sink_node = 0.0;
    std::vector<double> dist_src(n), dist_snk(m);
    std::vector<long> prev_src(n), prev_snk(m);  // predecessor on the path: sink for a source, source for a sink
    std::vector<char> done_src(n), done_snk(m);

    double remaining = std::accumulate(supply_left.begin(), supply_left.end(), 0.0);
    while (remaining > eps) {
        std::fill(dist_src.begin(), dist_src.end(), kInf);
        std::fill(dist_snk.begin(), dist_snk.end(), kInf);
        std::fill(done_src.begin(), done_src.end(), 0);
        std::fill(done_snk.begin(), done_snk.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (supply_left[i] > eps) {
                dist_src[i] = std::max(-pot_src[i], 0.0);
                prev_src[i] = -1;
            }
        }
        double dist_sink_node = kInf;
        long target = -1, best_sink = -1;
        for (;;) {
            double best = dist_sink_node;
            long pick = -1;
            int kind = 2;  // 0 source, 1 sink, 2 super sink
            for (std::size_t i = 0; i < n; ++i) {
                if (!done_src[i] && dist_src[i] < best) best = dist_src[i], pick = static_cast<long>(i), kind = 0;
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (!done_snk[j] && dist_snk[j] < best) best = dist_snk[j], pick = static_cast<long>(j), kind = 1;
            }
            if (kind == 2) {
                target = best_sink;
                break;
            }
            if (kind == 0) {
                const auto i = static_cast<std::size_t>(pick);
                done_src[i] = 1;
                for (std::size_t j = 0; j < m; ++j) {
                    if (done_snk[j]) continue;
                    const double rc = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + pot_src[i] - pot_snk[j];
                    const double nd = best + std::max(rc, 0.0);
                    if (nd < dist_snk[j]) dist_snk[j] = nd, prev_snk[j] = static_cast<long>(i);
                }
            } else {
                const auto j = static_cast<std::size_t>(pick);
                done_snk[j] = 1;
                if (demand_left[j] > eps) {
                    const double nd = best + std::max(pot_snk[j] - pot_sink_node, 0.0);
                    if (nd < dist_sink_node) dist_sink_node = nd, best_sink = pick;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (done_src[i] || flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0.0) continue;
                    const double rc = -cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + pot_snk[j] - pot_src[i];
                    const double nd = best + std::max(rc, 0.0);
                    if (nd < dist_src[i]) dist_src[i] = nd, prev_src[i] = static_cast<long>(j);
                }
            }
        }
        if (target < 0) throw Error("transport problem infeasible: supply and demand totals differ");
        const double reach = dist_sink_node;
        for (std::size_t i = 0; i < n; ++i) pot_src[i] += std::min(dist_src[i], reach);
        for (std::size_t j = 0; j < m; ++j) pot_snk[j] += std::min(dist_snk[j], reach);
        pot_sink_node += reach;

        // Bottleneck along sink target <- source <- sink <- ... <- source with supply.
        double amount = demand_left[static_cast<std::size_t>(target)];
        long j = target;
        long i = prev_snk[static_cast<std::size_t>(j)];
        for (;;) {
            const long back = prev_src[static_cast<std::size_t>(i)];
            if (back < 0) {
                amount = std::min(amount, supply_left[static_cast<std::size_t>(i)]);
                break;
            }
            amount = std::min(amount, flow(i, back));
            j = back;
            i = prev_snk[static_cast<std::size_t>(j)];
        }
        j = target;
        i = prev_snk[static_cast<std::size_t>(j)];
        demand_left[static_cast<std::size_t>(target)] -= amount;
        for (;;) {
            flow(i, j) += amount;
            const long back = prev_src[static_cast<std::size_t>(i)];
            if (back < 0) {
                supply_left[static_cast<std::size_t>(i)] -= amount;
                break;
            }
            flow(i, back) -= amount;
            j = back;
            i = prev_snk[static_cast<std::size_t>(j)];
        }
        remaining -= amount;
    }
    return (flow.array() * cost.array()).sum();
}

}  // namespace

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ValidationError("cost", "assignment needs a square matrix");
    const auto n = static_cast<std::size_t>(cost.rows());
    // Shortest augmenting paths with row/column potentials; 1-based with a
    // virtual column 0 holding the row being inserted.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[col0] = 1;
            const std::size_t r = match[col0];
            double delta = kInf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= n; ++c) {
                if (used[c]) continue;
                const double cur = cost(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) - u[r] - v[c];
                if (cur < minv[c]) minv[c] = cur, way[c] = col0;
                if (minv[c] < delta) delta = minv[c], col1 = c;
            }
            for (std::size_t c = 0; c <= n; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
    return assignment;
}

double wasserstein1(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    if (a.size() == 0 || b.size() == 0) throw ValidationError("distribution", "empty");
    a.validate();
    b.validate();
    if (a.points.rows() != b.points.rows()) throw ValidationError("distribution", "point dimensions differ");
    const Eigen::MatrixXd d = distance_matrix(a.points, b.points);
    if (a.size() == b.size() && uniform_weights(a) && uniform_weights(b)) {
        const auto assignment = solve_assignment(d);
        double total = 0.0;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            total += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i]));
        }
        return total / static_cast<double>(a.size());
    }
    if (a.size() > kMaxGeneralSize || b.size() > kMaxGeneralSize) {
        throw ValidationError("distribution", "general-weight transport limited to 4096 points per side");
    }
    return transport_cost(d, a.weights, b.weights);
}

double wasserstein1_1d(std::vector<double> x, std::vector<double> y) {
    if (x.empty() || y.empty()) throw ValidationError("distribution", "empty");
    if (x.size() != y.size()) throw ValidationError("distribution", "1D fast path needs equal counts");
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) total += std::abs(x[k] - y[k]);
    return total / static_cast<double>(x.size());
}

}  // namespace dynsc::metrics
