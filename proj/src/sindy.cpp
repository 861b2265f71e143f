#include "dynsc/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "dynsc/error.hpp"

namespace dynsc::sindy {

namespace {

// Exponent vectors of total degree `degree` over `vars` variables, in
// lexicographically descending order.
void enumerate_degree(std::size_t vars, int degree, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (cur.size() + 1 == vars) {
        cur.push_back(degree);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int v = degree; v >= 0; --v) {
        cur.push_back(v);
        enumerate_degree(vars, degree - v, cur, out);
        cur.pop_back();
    }
}

Eigen::VectorXd row_scales(const Eigen::MatrixXd& psi) {
    Eigen::VectorXd scale(psi.rows());
    const double k = std::max<double>(1.0, static_cast<double>(psi.cols()));
    for (Eigen::Index b = 0; b < psi.rows(); ++b) {
        const double rms = std::sqrt(psi.row(b).squaredNorm() / k);
        scale[b] = (rms > 0.0 && std::isfinite(rms)) ? rms : 1.0;
    }
    return scale;
}

// Least squares for one output over the active columns of the (already
// scaled) K x B design. Returns scaled coefficients, zero off the support.
Eigen::VectorXd solve_active(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                             const std::vector<Eigen::Index>& cols) {
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(design.cols());
    if (cols.empty()) return coef;
    Eigen::MatrixXd sub(design.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = design.col(cols[c]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
    const Eigen::VectorXd x = cod.solve(rhs);
    for (std::size_t c = 0; c < cols.size(); ++c) coef[cols[c]] = x[static_cast<Eigen::Index>(c)];
    return coef;
}

}  // namespace

std::size_t basis_size(std::size_t num_vars, int max_degree) {
    // binom(n + m, m) computed incrementally; saturates on overflow.
    const auto m = static_cast<std::size_t>(max_degree);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= m; ++i) {
        const std::size_t num = num_vars + i;
        if (r > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
        r = r * num / i;
    }
    return r;
}

MonomialBasis::MonomialBasis(std::vector<std::size_t> variable_map, int max_degree, std::size_t cap)
    : variable_map_(std::move(variable_map)), max_degree_(max_degree) {
    if (variable_map_.empty()) throw ValidationError("num_vars", "must be >= 1");
    if (max_degree < 0) throw ValidationError("max_degree", "must be >= 0");
    const std::size_t b = basis_size(variable_map_.size(), max_degree);
    if (b > cap) {
        throw ValidationError("max_degree", "basis size " + std::to_string(b) + " exceeds cap " + std::to_string(cap));
    }
    const std::size_t vars = variable_map_.size();
    exponents_.reserve(b);
    for (int d = 0; d <= max_degree; ++d) {
        std::vector<int> cur;
        enumerate_degree(vars, d, cur, exponents_);
    }
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < exponents_.size(); ++i) index.emplace(exponents_[i], i);
    parent_.assign(exponents_.size(), 0);
    factor_.assign(exponents_.size(), 0);
    for (std::size_t i = 1; i < exponents_.size(); ++i) {
        auto e = exponents_[i];
        const auto v = static_cast<std::size_t>(std::find_if(e.begin(), e.end(), [](int x) { return x > 0; }) - e.begin());
        --e[v];
        parent_[i] = index.at(e);
        factor_[i] = v;
    }
}

void MonomialBasis::eval_into(std::span<const double> state, std::span<double> out) const {
    out[0] = 1.0;
    for (std::size_t b = 1; b < exponents_.size(); ++b) {
        out[b] = out[parent_[b]] * state[variable_map_[factor_[b]]];
    }
}

Eigen::VectorXd MonomialBasis::eval(std::span<const double> state) const {
    for (std::size_t v : variable_map_) {
        if (v >= state.size()) throw ValidationError("state", "shorter than the basis variable map");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    eval_into(state, std::span<double>(out.data(), size()));
    return out;
}

std::string MonomialBasis::term_name(std::size_t b) const {
    const auto& e = exponents_.at(b);
    std::string s;
    for (std::size_t v = 0; v < e.size(); ++v) {
        if (e[v] == 0) continue;
        if (!s.empty()) s += "*";
        s += "x" + std::to_string(variable_map_[v]);
        if (e[v] > 1) s += "^" + std::to_string(e[v]);
    }
    return s.empty() ? "1" : s;
}

MonomialBasis build_basis(std::size_t num_vars, int max_degree, std::size_t cap) {
    if (num_vars < 1) throw ValidationError("num_vars", "must be >= 1");
    std::vector<std::size_t> map(num_vars);
    for (std::size_t i = 0; i < num_vars; ++i) map[i] = i;
    return MonomialBasis(std::move(map), max_degree, cap);
}

SparseCoefficients SparseCoefficients::zeros(Eigen::Index outputs, Eigen::Index terms) {
    SparseCoefficients c;
    c.values = Eigen::MatrixXd::Zero(outputs, terms);
    c.active = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(outputs, terms, false);
    return c;
}

Eigen::MatrixXd least_squares(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& rates, bool scale_columns) {
    if (psi.cols() != rates.cols()) throw ValidationError("rates", "snapshot count mismatch");
    const Eigen::VectorXd scale = scale_columns ? row_scales(psi) : Eigen::VectorXd::Ones(psi.rows());
    const Eigen::MatrixXd design = (scale.cwiseInverse().asDiagonal() * psi).transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    Eigen::MatrixXd coef = cod.solve(rates.transpose()).transpose();
    return coef * scale.cwiseInverse().asDiagonal();
}

SparseCoefficients stls(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& rates, double threshold,
                        const StlsOptions& options) {
    if (psi.cols() != rates.cols()) throw ValidationError("rates", "snapshot count mismatch");
    if (!(threshold >= 0.0)) throw ValidationError("threshold", "must be >= 0");
    const Eigen::Index terms = psi.rows();
    const Eigen::Index outputs = rates.rows();

    const Eigen::VectorXd scale = options.scale_columns ? row_scales(psi) : Eigen::VectorXd::Ones(terms);
    const Eigen::MatrixXd design = (scale.cwiseInverse().asDiagonal() * psi).transpose();

    SparseCoefficients out = SparseCoefficients::zeros(outputs, terms);
    out.active.setConstant(true);

    // The dense first pass shares one factorization across all outputs.
    {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
        out.values = (cod.solve(rates.transpose())).transpose() * scale.cwiseInverse().asDiagonal();
    }

    for (Eigen::Index s = 0; s < outputs; ++s) {
        for (int round = 0; round < options.max_rounds; ++round) {
            bool changed = false;
            for (Eigen::Index b = 0; b < terms; ++b) {
                if (out.active(s, b) && std::abs(out.values(s, b)) < threshold) {
                    out.active(s, b) = false;
                    changed = true;
                }
            }
            if (!changed) break;
            std::vector<Eigen::Index> cols;
            for (Eigen::Index b = 0; b < terms; ++b) {
                if (out.active(s, b)) cols.push_back(b);
            }
            const Eigen::VectorXd rhs = rates.row(s).transpose();
            const Eigen::VectorXd coef = solve_active(design, rhs, cols);
            for (Eigen::Index b = 0; b < terms; ++b) out.values(s, b) = coef[b] / scale[b];
        }
        for (Eigen::Index b = 0; b < terms; ++b) {
            if (!out.active(s, b)) out.values(s, b) = 0.0;
        }
    }
    return out;
}

RegressionData RegressionData::with_strided_split(Eigen::MatrixXd states, Eigen::MatrixXd rates, std::size_t stride) {
    if (states.cols() != rates.cols()) throw ValidationError("rates", "snapshot count mismatch");
    if (stride < 1) throw ValidationError("split", "stride must be >= 1");
    RegressionData d;
    d.states = std::move(states);
    d.rates = std::move(rates);
    for (std::size_t k = 0; k < static_cast<std::size_t>(d.states.cols()); ++k) {
        if (stride > 1 && (k + 1) % stride == 0) {
            d.validation.push_back(k);
        } else {
            d.train.push_back(k);
        }
    }
    return d;
}

Eigen::MatrixXd design_matrix(const MonomialBasis& basis, const Eigen::MatrixXd& states) {
    Eigen::MatrixXd psi(static_cast<Eigen::Index>(basis.size()), states.cols());
    for (Eigen::Index k = 0; k < states.cols(); ++k) {
        Eigen::VectorXd x = states.col(k);
        psi.col(k) = basis.eval(std::span<const double>(x.data(), x.size()));
    }
    return psi;
}

std::vector<double> log_sweep(double scale, double lo_factor, double hi_factor, std::size_t count) {
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
    if (count == 0) return {};
    if (count == 1) return {scale * std::sqrt(lo_factor * hi_factor)};
    std::vector<double> out(count);
    const double a = std::log(lo_factor * scale);
    const double b = std::log(hi_factor * scale);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return out;
}

double coefficient_scale(const Eigen::MatrixXd& ols) {
    const double largest = ols.cwiseAbs().maxCoeff();
    if (!(largest > 0.0) || !std::isfinite(largest)) return 1.0;
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < ols.size(); ++i) {
        const double m = std::abs(ols.data()[i]);
        if (m >= 1e-8 * largest) mags.push_back(m);
    }
    const auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    return *mid;
}

ThresholdSelection select_threshold(const RegressionData& data, const MonomialBasis& basis,
                                    std::span<const double> thresholds, const StlsOptions& options) {
    if (thresholds.empty()) throw ValidationError("sweep", "must be nonempty");
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw ValidationError("sweep", "must be ascending");
    if (data.train.empty()) throw ValidationError("split", "training split is empty");

    auto take = [](const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(idx[c]));
        return out;
    };
    const Eigen::MatrixXd psi_train = design_matrix(basis, take(data.states, data.train));
    const Eigen::MatrixXd r_train = take(data.rates, data.train);
    ThresholdSelection result;
    result.used_training_residual = data.validation.empty();
    const Eigen::MatrixXd psi_val =
        result.used_training_residual ? psi_train : design_matrix(basis, take(data.states, data.validation));
    const Eigen::MatrixXd r_val = result.used_training_residual ? r_train : take(data.rates, data.validation);

    std::vector<SparseCoefficients> fits;
    for (double tau : thresholds) {
        fits.push_back(stls(psi_train, r_train, tau, options));
        const auto& a = fits.back();
        result.sweep.push_back({tau, (r_val - a.values * psi_val).norm(), a.active_count()});
    }

    auto [rmin_it, rmax_it] = std::minmax_element(result.sweep.begin(), result.sweep.end(),
                                                  [](const auto& x, const auto& y) { return x.residual < y.residual; });
    auto [cmin_it, cmax_it] = std::minmax_element(result.sweep.begin(), result.sweep.end(),
                                                  [](const auto& x, const auto& y) { return x.active < y.active; });
    // Residuals are compared on a log scale, floored at 1e-16 of the largest,
    // so a jump of several decades is never hidden by the null model.
    const double floor = std::max(rmax_it->residual * 1e-16, std::numeric_limits<double>::min());
    const auto log_res = [&](double r) { return std::log(std::max(r, floor)); };
    const double rmin = log_res(rmin_it->residual), rrange = log_res(rmax_it->residual) - rmin;
    const double cmin = static_cast<double>(cmin_it->active);
    const double crange = static_cast<double>(cmax_it->active) - cmin;

    // Both ends of a two-point front score exactly 1, so equal scores are
    // settled by the lower residual before preferring the larger threshold.
    const double tie = 1e-12;
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.sweep.size(); ++i) {
        const auto& p = result.sweep[i];
        const double r = rrange > 0.0 ? (log_res(p.residual) - rmin) / rrange : 0.0;
        const double c = crange > 0.0 ? (static_cast<double>(p.active) - cmin) / crange : 0.0;
        const double score = r + c;
        bool take = score < best_score - tie;
        if (!take && score <= best_score + tie) {
            take = p.residual <= result.sweep[best].residual * (1.0 + tie);
        }
        if (take) {
            best_score = score;
            best = i;
        }
    }
    result.threshold = thresholds[best];
    result.coefficients = std::move(fits[best]);
    return result;
}

std::vector<MonomialBasis> local_bases(const std::vector<std::vector<std::size_t>>& adjacency,
                                       std::size_t dofs_per_node, int max_degree, std::size_t cap) {
    if (dofs_per_node < 1) throw ValidationError("dofs_per_node", "must be >= 1");
    const std::size_t n = adjacency.size();
    std::vector<std::set<std::size_t>> sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : adjacency[i]) {
            if (j >= n) throw ValidationError("adjacency", "neighbor index out of range");
            sets[i].insert(j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!sets[i].count(i)) throw ValidationError("adjacency", "node " + std::to_string(i) + " is not self-adjacent");
        for (std::size_t j : sets[i]) {
            if (!sets[j].count(i)) {
                throw ValidationError("adjacency", "asymmetric between nodes " + std::to_string(i) + " and " + std::to_string(j));
            }
        }
    }
    std::vector<MonomialBasis> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> map;
        for (std::size_t j : sets[i]) {
            for (std::size_t d = 0; d < dofs_per_node; ++d) map.push_back(j * dofs_per_node + d);
        }
        out.emplace_back(std::move(map), max_degree, cap);
    }
    return out;
}

}  // namespace dynsc::sindy
