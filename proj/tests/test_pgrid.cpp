#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dynsc/error.hpp"
#include "dynsc/pgrid.hpp"

using namespace dynsc;
using namespace dynsc::pgrid;

namespace {

// Independent count of a Smolyak node set: every nested 1D node is an angle
// k pi / 2^L on a common dyadic denominator, so the union over all index
// vectors with |l| <= q can be counted exactly on integers.
std::size_t smolyak_count_oracle(std::size_t dims, int order) {
    const int L = order + 1;
    const auto axis = [&](int index) {
        std::vector<long> angles;
        if (index == 0) return std::vector<long>{1L << (L - 1)};
        for (long k = 0; k <= (1L << index); ++k) angles.push_back(k << (L - index));
        return angles;
    };
    std::set<std::vector<long>> nodes;
    std::vector<int> l(dims, 0);
    for (;;) {
        int total = 0;
        for (int v : l) total += v;
        if (total <= order) {
            std::vector<std::vector<long>> axes;
            for (int v : l) axes.push_back(axis(v));
            std::vector<std::size_t> idx(dims, 0);
            for (;;) {
                std::vector<long> pt(dims);
                for (std::size_t p = 0; p < dims; ++p) pt[p] = axes[p][idx[p]];
                nodes.insert(pt);
                std::size_t p = dims;
                while (p-- > 0) {
                    if (++idx[p] < axes[p].size()) break;
                    idx[p] = 0;
                }
                if (p == static_cast<std::size_t>(-1)) break;
            }
        }
        std::size_t p = dims;
        while (p-- > 0) {
            if (++l[p] <= order) break;
            l[p] = 0;
        }
        if (p == static_cast<std::size_t>(-1)) break;
    }
    return nodes.size();
}

double monomial(const Eigen::VectorXd& x, const std::vector<int>& m) {
    double v = 1.0;
    for (std::size_t p = 0; p < m.size(); ++p) v *= std::pow(x[static_cast<Eigen::Index>(p)], m[p]);
    return v;
}

Eigen::MatrixXd random_cube(std::size_t dims, std::size_t count, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(count));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index p = 0; p < x.rows(); ++p) x(p, j) = u(gen);
    return x;
}

}  // namespace

TEST_CASE("cc nodes follow the cosine formula in formula order") {
    CHECK(cc_nodes_1d(1) == std::vector<double>{1.0, 0.0, -1.0});
    CHECK(cc_nodes_1d(0) == std::vector<double>{1.0, -1.0});
    const auto n3 = cc_nodes_1d(3);
    REQUIRE(n3.size() == 9);
    for (std::size_t j = 0; j < n3.size(); ++j) {
        CHECK(n3[j] == doctest::Approx(std::cos(static_cast<double>(j) * M_PI / 8.0)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(cc_nodes_1d(-1), ValidationError);
}

TEST_CASE("cc node families are nested as exact sets") {
    for (int l = 0; l < 8; ++l) {
        const auto a = cc_nodes_1d(l);
        const auto b = cc_nodes_1d(l + 1);
        const std::set<double> sb(b.begin(), b.end());
        for (double x : a) CHECK(sb.count(x) == 1);
    }
}

TEST_CASE("lagrange cardinal values") {
    const std::vector<double> three = {1.0, 0.0, -1.0};
    CHECK(lagrange_eval(three, 1, 0.0) == 1.0);
    CHECK(lagrange_eval(three, 0, 0.0) == 0.0);
    const std::vector<double> two = {1.0, -1.0};
    CHECK(lagrange_eval(two, 0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    const auto n = cc_nodes_1d(3);
    for (std::size_t j = 0; j < n.size(); ++j)
        for (std::size_t k = 0; k < n.size(); ++k) CHECK(lagrange_eval(n, j, n[k]) == doctest::Approx(j == k ? 1.0 : 0.0));
    const std::vector<double> dup = {0.5, 0.5};
    CHECK_THROWS_AS(lagrange_eval(dup, 0, 0.1), ValidationError);
}

TEST_CASE("tensor grid node counts") {
    CHECK(CollocationGrid::tensor({1, 1}).size() == 9);
    CHECK(CollocationGrid::tensor({2}).size() == 5);
    CHECK(CollocationGrid::tensor({1, 1, 1}).size() == 27);
    CHECK(CollocationGrid::tensor({2, 2}).size() == 25);
    CHECK(CollocationGrid::tensor({0}).size() == 2);
}

TEST_CASE("sparse grid node counts in 2D and 4D") {
    const std::size_t expected[] = {5, 13, 29, 65};
    for (int q = 1; q <= 4; ++q) CHECK(CollocationGrid::sparse(2, q).size() == expected[q - 1]);
    CHECK(CollocationGrid::sparse(4, 1).size() == 9);
    CHECK(CollocationGrid::sparse(3, 1).size() == 7);
    CHECK(CollocationGrid::sparse(3, 2).size() == 25);
}

TEST_CASE("sparse grid node sets match an independent union count") {
    for (std::size_t dims = 1; dims <= 4; ++dims) {
        for (int q = 1; q <= 4; ++q) {
            CAPTURE(dims);
            CAPTURE(q);
            CHECK(CollocationGrid::sparse(dims, q).size() == smolyak_count_oracle(dims, q));
        }
    }
}

TEST_CASE("grid nodes lie in the cube and are unique") {
    for (const auto& g : {CollocationGrid::sparse(3, 3), CollocationGrid::tensor({2, 1}), CollocationGrid::sparse(2, 4)}) {
        std::set<std::vector<double>> seen;
        for (Eigen::Index j = 0; j < g.nodes().cols(); ++j) {
            const Eigen::VectorXd c = g.nodes().col(j);
            CHECK(c.cwiseAbs().maxCoeff() <= 1.0);
            CHECK(seen.insert(std::vector<double>(c.data(), c.data() + c.size())).second);
        }
    }
}

TEST_CASE("1D interpolation reproduces monomials up to degree 2^level") {
    const Eigen::MatrixXd x = random_cube(1, 100, 7);
    for (int level = 0; level <= 5; ++level) {
        const auto grid = CollocationGrid::tensor({level});
        const auto gam = interpolation_matrix(grid, x);
        for (int m = 0; m <= (1 << level); ++m) {
            Eigen::VectorXd f(static_cast<Eigen::Index>(grid.size()));
            for (Eigen::Index j = 0; j < f.size(); ++j) f[j] = std::pow(grid.nodes()(0, j), m);
            const Eigen::VectorXd approx = gam.gamma * f;
            for (Eigen::Index i = 0; i < x.cols(); ++i) {
                const double exact = std::pow(x(0, i), m);
                CHECK(std::abs(approx[i] - exact) <= 1e-11 * std::max(1.0, std::abs(exact)));
            }
        }
    }
}

TEST_CASE("level-2 grid interpolates x^4 to 1e-12") {
    const auto grid = CollocationGrid::tensor({2});
    const Eigen::MatrixXd x = random_cube(1, 50, 3);
    const auto gam = interpolation_matrix(grid, x);
    Eigen::VectorXd f(5);
    for (Eigen::Index j = 0; j < 5; ++j) f[j] = std::pow(grid.nodes()(0, j), 4);
    const Eigen::VectorXd approx = gam.gamma * f;
    for (Eigen::Index i = 0; i < x.cols(); ++i) CHECK(approx[i] == doctest::Approx(std::pow(x(0, i), 4)).epsilon(1e-12));
}

TEST_CASE("tensor interpolation reproduces products of per-axis monomials") {
    const auto grid = CollocationGrid::tensor({1, 2});
    const Eigen::MatrixXd x = random_cube(2, 40, 11);
    const auto gam = interpolation_matrix(grid, x);
    for (int a = 0; a <= 2; ++a) {
        for (int b = 0; b <= 4; ++b) {
            Eigen::VectorXd f(static_cast<Eigen::Index>(grid.size()));
            for (Eigen::Index j = 0; j < f.size(); ++j) f[j] = monomial(grid.nodes().col(j), {a, b});
            const Eigen::VectorXd approx = gam.gamma * f;
            for (Eigen::Index i = 0; i < x.cols(); ++i) CHECK(std::abs(approx[i] - monomial(x.col(i), {a, b})) < 1e-12);
        }
    }
}

TEST_CASE("interpolation rows are a partition of unity") {
    for (const auto& g : {CollocationGrid::sparse(3, 3), CollocationGrid::sparse(2, 4), CollocationGrid::tensor({1, 1, 2})}) {
        const auto gam = interpolation_matrix(g, random_cube(g.dims(), 100, 5));
        for (Eigen::Index i = 0; i < gam.gamma.rows(); ++i) CHECK(std::abs(gam.gamma.row(i).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("a sample at a node gets the indicator row") {
    const auto g = CollocationGrid::sparse(2, 3);
    const auto gam = interpolation_matrix(g, g.nodes());
    for (Eigen::Index i = 0; i < gam.gamma.rows(); ++i)
        for (Eigen::Index j = 0; j < gam.gamma.cols(); ++j) CHECK(std::abs(gam.gamma(i, j) - (i == j ? 1.0 : 0.0)) < 1e-13);
}

TEST_CASE("sparse and tensor interpolants agree on total-degree-1 polynomials") {
    const auto sparse = CollocationGrid::sparse(3, 1);
    const auto tensor = CollocationGrid::tensor({1, 1, 1});
    const Eigen::MatrixXd x = random_cube(3, 30, 9);
    const auto gs = interpolation_matrix(sparse, x);
    const auto gt = interpolation_matrix(tensor, x);
    const auto f = [](const Eigen::VectorXd& p) { return 0.3 + 1.5 * p[0] - 2.0 * p[1] + 0.7 * p[2]; };
    Eigen::VectorXd fs(static_cast<Eigen::Index>(sparse.size())), ft(static_cast<Eigen::Index>(tensor.size()));
    for (Eigen::Index j = 0; j < fs.size(); ++j) fs[j] = f(sparse.nodes().col(j));
    for (Eigen::Index j = 0; j < ft.size(); ++j) ft[j] = f(tensor.nodes().col(j));
    const Eigen::VectorXd a = gs.gamma * fs, b = gt.gamma * ft;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        CHECK(std::abs(a[i] - b[i]) < 1e-12);
        CHECK(std::abs(a[i] - f(x.col(i))) < 1e-12);
    }
}

TEST_CASE("sparse grids are exact for total-degree polynomials up to the order") {
    // Order q with the midpoint-first index convention reproduces total degree q.
    const auto g = CollocationGrid::sparse(2, 2);
    const Eigen::MatrixXd x = random_cube(2, 30, 13);
    const auto gam = interpolation_matrix(g, x);
    for (int a = 0; a <= 2; ++a) {
        for (int b = 0; a + b <= 2; ++b) {
            Eigen::VectorXd f(static_cast<Eigen::Index>(g.size()));
            for (Eigen::Index j = 0; j < f.size(); ++j) f[j] = monomial(g.nodes().col(j), {a, b});
            const Eigen::VectorXd approx = gam.gamma * f;
            for (Eigen::Index i = 0; i < x.cols(); ++i) CHECK(std::abs(approx[i] - monomial(x.col(i), {a, b})) < 1e-12);
        }
    }
}

TEST_CASE("samples outside the cube are rejected") {
    Eigen::MatrixXd x(1, 1);
    x(0, 0) = 1.01;
    CHECK_THROWS_AS(interpolation_matrix(CollocationGrid::tensor({1}), x), ValidationError);
}

TEST_CASE("parameter space maps affinely to the reference cube") {
    const ParameterSpace s({28.0 - 1.4, 0.0}, {28.0 + 1.4, 2.0});
    const std::vector<double> mid = {28.0, 2.0};
    const Eigen::VectorXd r = s.to_reference(std::span<const double>(mid));
    CHECK(std::abs(r[0]) < 1e-15);
    CHECK(r[1] == 1.0);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const std::vector<double> lam = {26.6 + 2.8 * u(gen), 2.0 * u(gen)};
        const Eigen::VectorXd ref = s.to_reference(std::span<const double>(lam));
        const Eigen::VectorXd back = s.from_reference(std::span<const double>(ref.data(), 2));
        CHECK(std::abs(back[0] - lam[0]) <= 1e-14 * 28.0);
        CHECK(std::abs(back[1] - lam[1]) <= 1e-14);
    }
    const std::vector<double> out = {30.0, 1.0};
    CHECK_THROWS_AS(s.to_reference(std::span<const double>(out)), ValidationError);
    CHECK_THROWS_AS(ParameterSpace({1.0}, {1.0}), ValidationError);
}

TEST_CASE("grid json round trip keeps nodes and combination weights") {
    const auto g = CollocationGrid::sparse(3, 2);
    const auto back = CollocationGrid::from_json(g.to_json());
    CHECK(back.size() == g.size());
    CHECK(back.kind() == GridKind::Sparse);
    CHECK(back.order() == 2);
    CHECK((back.nodes() - g.nodes()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.components().size() == g.components().size());
    for (std::size_t c = 0; c < g.components().size(); ++c) {
        CHECK(back.components()[c].levels == g.components()[c].levels);
        CHECK(back.components()[c].weight == g.components()[c].weight);
    }
}
