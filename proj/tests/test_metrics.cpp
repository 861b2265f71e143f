#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dynsc/error.hpp"
#include "dynsc/metrics.hpp"

using namespace dynsc;
using namespace dynsc::metrics;
using integrate::TrajectoryEnsemble;

namespace {

// Minimum over all permutations of the mean matched distance.
double brute_force_w1(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    std::vector<int> perm(static_cast<std::size_t>(a.cols()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (Eigen::Index i = 0; i < a.cols(); ++i) cost += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).norm();
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(a.cols());
}

// 1D W1 as the integral of |F - G| over the merged support.
double cdf_w1(const std::vector<double>& x, const std::vector<double>& wx, const std::vector<double>& y,
              const std::vector<double>& wy) {
    std::vector<double> pts = x;
    pts.insert(pts.end(), y.begin(), y.end());
    std::sort(pts.begin(), pts.end());
    auto cdf = [](const std::vector<double>& v, const std::vector<double>& w, double t) {
        double s = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k)
            if (v[k] <= t) s += w[k];
        return s;
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        total += std::abs(cdf(x, wx, pts[k]) - cdf(y, wy, pts[k])) * (pts[k + 1] - pts[k]);
    }
    return total;
}

EmpiricalDistribution weighted(const Eigen::MatrixXd& pts, const std::vector<double>& w) {
    return {pts, Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))};
}

TrajectoryEnsemble ensemble(std::vector<Eigen::MatrixXd> states, std::size_t records) {
    TrajectoryEnsemble e;
    e.model = "test";
    e.dt = 0.1;
    e.stride = 1;
    for (std::size_t k = 0; k < records; ++k) e.times.push_back(0.1 * static_cast<double>(k));
    e.param_points = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(states.size()));
    e.states = std::move(states);
    return e;
}

}  // namespace

TEST_CASE("trajectory errors are normalized by the largest reference state") {
    Eigen::MatrixXd r0(2, 3), r1(2, 3);
    r0 << 0, 3, 0, 0, 4, 1;
    r1 << 1, 1, 1, 1, 1, 1;
    const auto ref = ensemble({r0, r1}, 3);
    CHECK(phi_max(ref) == 5.0);
    Eigen::MatrixXd s0 = r0, s1 = r1;
    s0(0, 2) += 1.0;
    s1(1, 2) += 2.0;
    const auto err = trajectory_errors(ref, ensemble({s0, s1}, 3));
    CHECK(err.phi_max == 5.0);
    CHECK(err.error_avg[0] == 0.0);
    CHECK(err.error_avg[2] == doctest::Approx(0.3));
    CHECK(err.error_max[2] == doctest::Approx(0.4));
    CHECK(trajectory_errors(ref, ref).error_max[2] == 0.0);
    CHECK(trajectory_errors(ref, ensemble({s0, s1}, 3), 1.0).error_max[2] == doctest::Approx(2.0));
}

TEST_CASE("mismatched ensembles are rejected") {
    const auto a = ensemble({Eigen::MatrixXd::Zero(2, 3)}, 3);
    const auto b = ensemble({Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3)}, 3);
    CHECK_THROWS_AS(trajectory_errors(a, b), ValidationError);
}

TEST_CASE("W1 agrees with permutation brute force") {
    std::mt19937_64 gen(31);
    std::uniform_int_distribution<int> size(1, 6), dim(1, 3);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int m = size(gen), d = dim(gen);
        Eigen::MatrixXd a(d, m), b(d, m);
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            a.data()[k] = n(gen);
            b.data()[k] = n(gen) + 0.5;
        }
        const double got = wasserstein1(EmpiricalDistribution::uniform(a), EmpiricalDistribution::uniform(b));
        worst = std::max(worst, std::abs(got - brute_force_w1(a, b)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("W1 in one dimension is the sorted difference") {
    std::mt19937_64 gen(32);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(17), y(17);
        for (auto& v : x) v = n(gen);
        for (auto& v : y) v = 2.0 * n(gen);
        const Eigen::MatrixXd a = Eigen::Map<Eigen::MatrixXd>(x.data(), 1, 17);
        const Eigen::MatrixXd b = Eigen::Map<Eigen::MatrixXd>(y.data(), 1, 17);
        CHECK(wasserstein1(EmpiricalDistribution::uniform(a), EmpiricalDistribution::uniform(b)) ==
              doctest::Approx(wasserstein1_1d(x, y)).epsilon(1e-10));
    }
    CHECK(wasserstein1_1d({0.0, 1.0}, {1.0, 2.0}) == 1.0);
}

TEST_CASE("W1 metric properties") {
    std::mt19937_64 gen(33);
    std::normal_distribution<double> n(0.0, 1.0);
    auto cloud = [&](int m) {
        Eigen::MatrixXd c(2, m);
        for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = n(gen);
        return c;
    };
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = EmpiricalDistribution::uniform(cloud(8));
        const auto b = EmpiricalDistribution::uniform(cloud(8));
        const auto c = EmpiricalDistribution::uniform(cloud(8));
        const double ab = wasserstein1(a, b), ba = wasserstein1(b, a);
        CHECK(wasserstein1(a, a) == doctest::Approx(0.0));
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= wasserstein1(a, c) + wasserstein1(c, b) + 1e-12);

        // Scaling both sides scales W1; a rigid shift of a copy costs |shift|.
        EmpiricalDistribution a2 = a, b2 = b;
        a2.points *= 3.0;
        b2.points *= 3.0;
        CHECK(wasserstein1(a2, b2) == doctest::Approx(3.0 * ab).epsilon(1e-10));
        a2 = a;
        b2 = a;
        b2.points.colwise() += Eigen::Vector2d(0.3, -0.4);
        CHECK(wasserstein1(a2, b2) == doctest::Approx(0.5).epsilon(1e-10));
    }
}

TEST_CASE("W1 with unequal weights matches the 1D CDF formula") {
    std::mt19937_64 gen(34);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 2 + trial % 5, k = 1 + trial % 4;
        std::vector<double> x(static_cast<std::size_t>(m)), y(static_cast<std::size_t>(k)), wx(x.size()), wy(y.size());
        for (auto& v : x) v = u(gen) * 4.0;
        for (auto& v : y) v = u(gen) * 4.0;
        for (auto& w : wx) w = 0.1 + u(gen);
        for (auto& w : wy) w = 0.1 + u(gen);
        const double sx = std::accumulate(wx.begin(), wx.end(), 0.0), sy = std::accumulate(wy.begin(), wy.end(), 0.0);
        for (auto& w : wx) w /= sx;
        for (auto& w : wy) w /= sy;
        const auto a = weighted(Eigen::Map<Eigen::MatrixXd>(x.data(), 1, m), wx);
        const auto b = weighted(Eigen::Map<Eigen::MatrixXd>(y.data(), 1, k), wy);
        CHECK(wasserstein1(a, b) == doctest::Approx(cdf_w1(x, wx, y, wy)).epsilon(1e-9));
    }
}

TEST_CASE("W1 with rational weights matches equal-weight replication") {
    // Weights {1/4, 3/4} against {1/2, 1/2} equal the 4-point equal-weight problem.
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0.0, 1.0, 0.0, 2.0;
    b << 3.0, -1.0, 1.0, 0.5;
    const double got = wasserstein1(weighted(a, {0.25, 0.75}), weighted(b, {0.5, 0.5}));
    Eigen::MatrixXd ra(2, 4), rb(2, 4);
    ra << a.col(0), a.col(1), a.col(1), a.col(1);
    rb << b.col(0), b.col(0), b.col(1), b.col(1);
    CHECK(got == doctest::Approx(brute_force_w1(ra, rb)).epsilon(1e-12));
}

TEST_CASE("assignment solver finds the optimal matching") {
    Eigen::MatrixXd cost(3, 3);
    cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const auto match = solve_assignment(cost);
    double total = 0.0;
    for (std::size_t r = 0; r < 3; ++r) total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(match[r]));
    CHECK(total == 5.0);
}

TEST_CASE("invalid weights are rejected") {
    const Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(weighted(pts, {0.5, 0.6}).validate(), ValidationError);
    CHECK_THROWS_AS(weighted(pts, {1.5, -0.5}).validate(), ValidationError);
}

TEST_CASE("distance series between identical ensembles is zero") {
    std::vector<Eigen::MatrixXd> s;
    for (int i = 0; i < 5; ++i) s.push_back(Eigen::MatrixXd::Random(3, 7));
    const auto ref = ensemble(s, 7);
    const auto series = distribution_error_series(ref, ref, 3);
    CHECK(series.records == std::vector<std::size_t>{0, 3, 6});
    for (double d : series.distance) CHECK(d == doctest::Approx(0.0));
    const auto series4 = distribution_error_series(ref, ref, 4);
    CHECK(series4.records == std::vector<std::size_t>{0, 4, 6});
}

TEST_CASE("node distance field shape and values") {
    // Mesh state [u; v] with 3 nodes.
    std::vector<Eigen::MatrixXd> r, s;
    for (int i = 0; i < 4; ++i) {
        r.push_back(Eigen::MatrixXd::Zero(6, 5));
        Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(6, 5);
        shifted.row(1).setConstant(0.3);  // u at node 1
        shifted.row(5).setConstant(0.4);  // v at node 2
        s.push_back(shifted);
    }
    const auto field = node_distribution_errors(ensemble(r, 5), ensemble(s, 5), 3, 2, 1.0, 2.0);
    CHECK(field.distance.rows() == 3);
    CHECK(field.distance.cols() == 3);
    CHECK(field.records == std::vector<std::size_t>{0, 2, 4});
    CHECK(field.distance(0, 1) == doctest::Approx(0.0));
    CHECK(field.distance(1, 1) == doctest::Approx(0.3));
    CHECK(field.distance(2, 1) == doctest::Approx(0.8));
}

TEST_CASE("field errors in model units") {
    std::vector<Eigen::MatrixXd> r{Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Zero(4, 2)};
    auto s = r;
    s[0](2, 1) = 1.0;
    s[1](2, 1) = -3.0;
    const auto fe = field_errors(ensemble(r, 2), ensemble(s, 2), 2, 2);
    CHECK(fe.avg.rows() == 2);
    CHECK(fe.avg(0, 1) == 2.0);
    CHECK(fe.max(0, 1) == 3.0);
    CHECK(fe.max(1, 1) == 0.0);
}

TEST_CASE("KDE") {
    std::mt19937_64 gen(35);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(400);
    for (auto& v : x) v = n(gen);
    std::vector<double> sym = x;
    for (double v : x) sym.push_back(-v);
    std::vector<double> grid;
    for (int k = -800; k <= 800; ++k) grid.push_back(0.01 * k);
    const auto kde = kde_1d(sym, grid);
    CHECK(kde.bandwidth > 0.0);
    double integral = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(kde.density[k] >= 0.0);
        CHECK(kde.density[k] == doctest::Approx(kde.density[grid.size() - 1 - k]).epsilon(1e-10));
        if (k > 0) integral += 0.5 * (kde.density[k] + kde.density[k - 1]) * 0.01;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));

    // Silverman: 0.9 min(sd, IQR / 1.34) n^(-1/5) on a symmetric two-point set.
    const std::vector<double> two = {-1.0, 1.0, -1.0, 1.0};
    const double sd = std::sqrt(4.0 / 3.0);
    const double iqr = 2.0;
    CHECK(kde_1d(two, grid).bandwidth == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(4.0, -0.2)));

    const std::vector<double> same = {2.5, 2.5, 2.5};
    const auto pm = kde_1d(same, grid);
    CHECK(pm.point_mass);
    CHECK(pm.location == 2.5);
    CHECK(pm.density.empty());
}
