#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dynsc/error.hpp"
#include "dynsc/integrate.hpp"
#include "dynsc/models.hpp"
#include "dynsc/sindy.hpp"

using namespace dynsc;
using namespace dynsc::sindy;

namespace {

std::size_t index_of(const MonomialBasis& basis, const std::vector<int>& exps) {
    for (std::size_t b = 0; b < basis.size(); ++b) {
        if (basis.exponents()[b] == exps) return b;
    }
    FAIL("monomial not in basis");
    return 0;
}

Eigen::MatrixXd random_states(Eigen::Index vars, Eigen::Index count, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd x(vars, count);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = n(gen);
    return x;
}

// Sparse coefficient matrix with entries of magnitude in [0.5, 2].
Eigen::MatrixXd random_sparse(Eigen::Index outputs, Eigen::Index terms, double density, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(outputs, terms);
    for (Eigen::Index s = 0; s < outputs; ++s) {
        for (Eigen::Index b = 0; b < terms; ++b) {
            if (u(gen) < density) a(s, b) = (u(gen) < 0.5 ? -1.0 : 1.0) * (0.5 + 1.5 * u(gen));
        }
        if ((a.row(s).array() != 0.0).count() == 0) a(s, s % terms) = 1.0;
    }
    return a;
}

struct LorenzData {
    Eigen::MatrixXd states;
    Eigen::MatrixXd rates;
};

LorenzData lorenz_snapshots(std::size_t count) {
    const models::LorenzModel model;
    const Eigen::Vector3d params(28.0, 10.0, 8.0 / 3.0);
    integrate::IntegratorConfig cfg{integrate::Scheme::RK4, 1e-3, 10 * (count - 1), 10};
    const auto traj = integrate::integrate(model.dynamics(), model.initial_state(), params, cfg);
    LorenzData d{traj.states, Eigen::MatrixXd(3, traj.states.cols())};
    for (Eigen::Index k = 0; k < d.states.cols(); ++k) d.rates.col(k) = models::lorenz_rhs(Eigen::Vector3d(d.states.col(k)), params);
    return d;
}

}  // namespace

TEST_CASE("basis sizes follow the binomial count") {
    CHECK(build_basis(3, 2).size() == 10);
    CHECK(build_basis(1, 0).size() == 1);
    CHECK(build_basis(2, 3).size() == 10);
    CHECK(basis_size(3, 5) == 56);
    CHECK_THROWS_AS(build_basis(50, 10, 1000), ValidationError);
}

TEST_CASE("basis exponents are unique, graded and start with the constant") {
    const auto b = build_basis(3, 4);
    std::set<std::vector<int>> seen;
    int prev_degree = 0;
    for (const auto& e : b.exponents()) {
        CHECK(seen.insert(e).second);
        int d = 0;
        for (int v : e) d += v;
        CHECK(d >= prev_degree);
        CHECK(d <= 4);
        prev_degree = d;
    }
    CHECK(b.exponents().front() == std::vector<int>{0, 0, 0});
    // Every exponent vector of total degree <= 4 is present.
    int total = 0;
    for (int a = 0; a <= 4; ++a)
        for (int c = 0; a + c <= 4; ++c)
            for (int e = 0; a + c + e <= 4; ++e) ++total;
    CHECK(b.size() == static_cast<std::size_t>(total));
}

TEST_CASE("basis evaluation") {
    const auto b2 = build_basis(2, 2);
    const std::vector<double> zero = {0.0, 0.0};
    const Eigen::VectorXd v0 = b2.eval(zero);
    CHECK(v0[0] == 1.0);
    CHECK(v0.tail(5).cwiseAbs().maxCoeff() == 0.0);
    const auto b1 = build_basis(1, 2);
    const std::vector<double> two = {2.0};
    const Eigen::VectorXd v = b1.eval(two);
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 2.0);
    CHECK(v[2] == 4.0);

    // Direct product over exponents on a random state, including a variable map.
    const MonomialBasis mapped({4, 1, 2}, 3);
    const std::vector<double> state = {9.0, 0.7, -1.3, 9.0, 0.4};
    const Eigen::VectorXd got = mapped.eval(state);
    for (std::size_t b = 0; b < mapped.size(); ++b) {
        const auto& e = mapped.exponents()[b];
        const double want = std::pow(0.4, e[0]) * std::pow(0.7, e[1]) * std::pow(-1.3, e[2]);
        CHECK(got[static_cast<Eigen::Index>(b)] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("stls recovers a noiseless sparse truth") {
    const auto basis = build_basis(3, 3);
    const Eigen::MatrixXd x = random_states(3, 200, 1);
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd a = random_sparse(3, static_cast<Eigen::Index>(basis.size()), 0.3, 2);
    const Eigen::MatrixXd r = a * psi;
    const auto fit = stls(psi, r, 0.1);
    CHECK((fit.values - a).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index s = 0; s < a.rows(); ++s)
        for (Eigen::Index b = 0; b < a.cols(); ++b) CHECK(fit.active(s, b) == (a(s, b) != 0.0));
}

TEST_CASE("zero threshold gives the dense least-squares fit") {
    const auto basis = build_basis(2, 2);
    const Eigen::MatrixXd x = random_states(2, 60, 3);
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd r = random_states(2, 60, 4);
    const auto fit = stls(psi, r, 0.0);
    CHECK(fit.active_count() == 2 * basis.size());
    // Normal-equation oracle.
    const Eigen::MatrixXd ols = (psi * psi.transpose()).ldlt().solve(psi * r.transpose()).transpose();
    CHECK((fit.values - ols).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stls is idempotent on data generated by its own output") {
    const auto basis = build_basis(3, 2);
    const Eigen::MatrixXd x = random_states(3, 100, 5);
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd noisy = random_sparse(3, 10, 0.4, 6) * psi + 1e-3 * random_states(3, 100, 7);
    const auto first = stls(psi, noisy, 0.2);
    const auto second = stls(psi, first.values * psi, 0.2);
    CHECK(second.active == first.active);
    CHECK((second.values - first.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("active set size is monotone in the threshold") {
    const auto basis = build_basis(3, 3);
    const Eigen::MatrixXd x = random_states(3, 150, 8);
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd r = random_sparse(3, static_cast<Eigen::Index>(basis.size()), 0.3, 9) * psi +
                              0.05 * random_states(3, 150, 10);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double tau : log_sweep(1.0, 1e-4, 1e1, 30)) {
        const auto fit = stls(psi, r, tau);
        CHECK(fit.active_count() <= prev);
        prev = fit.active_count();
    }
}

TEST_CASE("output rows decouple") {
    const auto basis = build_basis(2, 3);
    const Eigen::MatrixXd x = random_states(2, 80, 11);
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd r = random_sparse(3, static_cast<Eigen::Index>(basis.size()), 0.4, 12) * psi +
                              0.01 * random_states(3, 80, 13);
    const auto joint = stls(psi, r, 0.3);
    for (Eigen::Index s = 0; s < r.rows(); ++s) {
        const auto single = stls(psi, r.row(s), 0.3);
        CHECK(single.active.row(0) == joint.active.row(s));
        CHECK((single.values.row(0) - joint.values.row(s)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("a threshold above every coefficient returns a zero row") {
    const auto basis = build_basis(2, 2);
    const Eigen::MatrixXd psi = design_matrix(basis, random_states(2, 40, 14));
    const Eigen::MatrixXd r = random_sparse(1, 6, 0.5, 15) * psi;
    const auto fit = stls(psi, r, 1e6);
    CHECK(fit.active_count() == 0);
    CHECK(fit.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank-deficient designs fall back to a minimum-norm solution") {
    const auto basis = build_basis(2, 2);
    Eigen::MatrixXd x = random_states(2, 30, 16);
    x.row(1) = 2.0 * x.row(0);  // y = 2x makes several monomials collinear
    const Eigen::MatrixXd psi = design_matrix(basis, x);
    const Eigen::MatrixXd r = psi.row(1) + psi.row(2);
    const auto fit = stls(psi, r, 0.0);
    CHECK(fit.values.allFinite());
    CHECK((fit.values * psi - r).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stls recovers the Lorenz equations from 200 exact snapshots") {
    const auto d = lorenz_snapshots(200);
    const auto basis = build_basis(3, 2);
    const auto fit = stls(design_matrix(basis, d.states), d.rates, 0.1);
    const auto X = index_of(basis, {1, 0, 0}), Y = index_of(basis, {0, 1, 0}), Z = index_of(basis, {0, 0, 1});
    const auto XY = index_of(basis, {1, 1, 0}), XZ = index_of(basis, {1, 0, 1});
    const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(3, 10);
    truth(0, static_cast<Eigen::Index>(Y)) = sigma;
    truth(0, static_cast<Eigen::Index>(X)) = -sigma;
    truth(1, static_cast<Eigen::Index>(X)) = rho;
    truth(1, static_cast<Eigen::Index>(XZ)) = -1.0;
    truth(1, static_cast<Eigen::Index>(Y)) = -1.0;
    truth(2, static_cast<Eigen::Index>(XY)) = 1.0;
    truth(2, static_cast<Eigen::Index>(Z)) = -beta;
    CHECK(fit.active_count() == 7);
    for (Eigen::Index s = 0; s < 3; ++s) {
        for (Eigen::Index b = 0; b < 10; ++b) {
            CHECK(fit.active(s, b) == (truth(s, b) != 0.0));
            if (truth(s, b) != 0.0) CHECK(std::abs(fit.values(s, b) / truth(s, b) - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("strided split holds out every fifth column") {
    const auto d = RegressionData::with_strided_split(Eigen::MatrixXd::Zero(1, 12), Eigen::MatrixXd::Zero(1, 12));
    CHECK(d.validation == std::vector<std::size_t>{4, 9});
    CHECK(d.train.size() == 10);
}

TEST_CASE("threshold selection recovers the support of a noiseless truth") {
    const auto basis = build_basis(3, 3);
    const Eigen::MatrixXd x = random_states(3, 200, 17);
    const Eigen::MatrixXd a = random_sparse(3, static_cast<Eigen::Index>(basis.size()), 0.25, 18);
    const auto data = RegressionData::with_strided_split(x, a * design_matrix(basis, x));
    const auto sweep = log_sweep(1.0, 1e-4, 1e1, 16);
    const auto sel = select_threshold(data, basis, sweep);
    CHECK(sel.coefficients.active.cast<int>() == (a.array() != 0.0).matrix().cast<int>());
    CHECK((sel.coefficients.values - a).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_FALSE(sel.used_training_residual);
}

TEST_CASE("threshold selection with one candidate returns it") {
    const auto basis = build_basis(2, 2);
    const Eigen::MatrixXd x = random_states(2, 50, 19);
    const auto data = RegressionData::with_strided_split(x, random_states(2, 50, 20));
    const std::vector<double> one = {0.37};
    CHECK(select_threshold(data, basis, one).threshold == 0.37);
}

TEST_CASE("the all-zero candidate loses to a sparser-or-equal lower-residual one") {
    // One true term: the candidate at the true support has the same sparsity
    // penalty as the all-zero model once the active counts are normalized.
    const auto basis = build_basis(1, 2);
    const Eigen::MatrixXd x = random_states(1, 50, 21);
    const Eigen::MatrixXd r = 0.8 * x;
    const auto data = RegressionData::with_strided_split(x, r);
    const std::vector<double> sweep = {0.5, 1.0};
    const auto sel = select_threshold(data, basis, sweep);
    REQUIRE(sel.sweep.size() == 2);
    CHECK(sel.sweep[1].active == 0);
    CHECK(sel.sweep[1].residual == doctest::Approx(r(0, Eigen::seq(4, 49, 5)).norm()));
    CHECK(sel.threshold == 0.5);
    CHECK(sel.coefficients.active_count() == 1);
}

TEST_CASE("an empty validation split falls back to training residuals") {
    const auto basis = build_basis(1, 1);
    const Eigen::MatrixXd x = random_states(1, 3, 22);
    const auto data = RegressionData::with_strided_split(x, 2.0 * x, 5);
    CHECK(data.validation.empty());
    const std::vector<double> sweep = {0.1};
    CHECK(select_threshold(data, basis, sweep).used_training_residual);
}

TEST_CASE("local bases follow the mesh neighborhoods") {
    std::vector<std::vector<std::size_t>> chain(100);
    for (std::size_t n = 0; n < 100; ++n) {
        if (n > 0) chain[n].push_back(n - 1);
        chain[n].push_back(n);
        if (n + 1 < 100) chain[n].push_back(n + 1);
    }
    const auto bases = local_bases(chain, 1, 2);
    CHECK(bases[50].num_vars() == 3);
    CHECK(bases[50].variable_map() == std::vector<std::size_t>{49, 50, 51});
    CHECK(bases[0].num_vars() == 2);
    CHECK(bases[99].num_vars() == 2);

    std::vector<std::vector<std::size_t>> complete(5, {0, 1, 2, 3, 4});
    for (const auto& b : local_bases(complete, 2, 1)) CHECK(b.num_vars() == 10);

    std::vector<std::vector<std::size_t>> asym = {{0, 1}, {1}};
    CHECK_THROWS_AS(local_bases(asym, 1, 2), ValidationError);
}
