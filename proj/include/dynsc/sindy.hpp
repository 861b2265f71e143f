#pragma once

// Sparse regression of dynamics onto monomial dictionaries.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dynsc::sindy {

/// Monomials of total degree <= max_degree in a subset of the global state.
/// Exponents are listed in graded-lexicographic order, so the constant term
/// comes first and every monomial of degree d >= 1 has a "parent" of degree
/// d - 1 that appears earlier.
class MonomialBasis {
public:
    MonomialBasis() = default;
    MonomialBasis(std::vector<std::size_t> variable_map, int max_degree, std::size_t cap = 1'000'000);

    std::size_t num_vars() const noexcept { return variable_map_.size(); }
    int max_degree() const noexcept { return max_degree_; }
    std::size_t size() const noexcept { return exponents_.size(); }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }
    const std::vector<std::size_t>& variable_map() const noexcept { return variable_map_; }

    /// psi(state): state is the global vector, indexed through variable_map.
    Eigen::VectorXd eval(std::span<const double> state) const;
    void eval_into(std::span<const double> state, std::span<double> out) const;

    /// For b >= 1, monomial b = monomial parent(b) * state[variable_map[factor(b)]].
    std::size_t parent(std::size_t b) const { return parent_[b]; }
    std::size_t factor(std::size_t b) const { return factor_[b]; }

    bool operator==(const MonomialBasis& other) const {
        return variable_map_ == other.variable_map_ && exponents_ == other.exponents_;
    }

    /// Human-readable monomial, e.g. "x0*x2^2" in local variable names.
    std::string term_name(std::size_t b) const;

private:
    std::vector<std::size_t> variable_map_;
    int max_degree_ = 0;
    std::vector<std::vector<int>> exponents_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> factor_;
};

/// binom(num_vars + max_degree, num_vars), saturating at SIZE_MAX.
std::size_t basis_size(std::size_t num_vars, int max_degree);

/// Basis over global state indices 0..num_vars-1.
MonomialBasis build_basis(std::size_t num_vars, int max_degree, std::size_t cap = 1'000'000);

/// A (S_out x B) plus its support. values(s, b) == 0 wherever !active(s, b).
struct SparseCoefficients {
    Eigen::MatrixXd values;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> active;

    static SparseCoefficients zeros(Eigen::Index outputs, Eigen::Index terms);
    std::size_t active_count() const { return static_cast<std::size_t>(active.count()); }
    Eigen::Index outputs() const { return values.rows(); }
    Eigen::Index terms() const { return values.cols(); }
};

struct StlsOptions {
    int max_rounds = 10;
    /// Normalize basis rows of Psi to unit RMS before solving.
    bool scale_columns = true;
};

/// Sequentially thresholded least squares for R ~ A Psi.
/// Psi is B x K, R is S_out x K. The threshold applies to unscaled |A_sb|.
SparseCoefficients stls(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& rates, double threshold,
                        const StlsOptions& options = {});

/// Ordinary least squares (minimum-norm on rank deficiency), unscaled.
Eigen::MatrixXd least_squares(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& rates, bool scale_columns = true);

/// Snapshot columns: states (S x K) and matching dynamics evaluations (S_out x K).
struct RegressionData {
    Eigen::MatrixXd states;
    Eigen::MatrixXd rates;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;

    /// Every `stride`-th column (indices stride-1, 2*stride-1, ...) goes to validation.
    static RegressionData with_strided_split(Eigen::MatrixXd states, Eigen::MatrixXd rates, std::size_t stride = 5);
};

struct SweepPoint {
    double threshold = 0.0;
    double residual = 0.0;
    std::size_t active = 0;
};

struct ThresholdSelection {
    double threshold = 0.0;
    SparseCoefficients coefficients;
    std::vector<SweepPoint> sweep;
    /// True when no validation columns existed and training residuals were used.
    bool used_training_residual = false;
};

/// Fits stls on the training split for each threshold and picks the Pareto knee:
/// log validation residual (floored at 1e-16 of the largest) and active count
/// are each min-max normalized over the sweep and the smallest sum wins.
/// Equal sums go to the lower validation residual, then to the larger threshold.
/// `thresholds` must be nonempty and ascending.
ThresholdSelection select_threshold(const RegressionData& data, const MonomialBasis& basis,
                                    std::span<const double> thresholds, const StlsOptions& options = {});

/// `count` log-spaced thresholds on [lo_factor, hi_factor] * scale.
std::vector<double> log_sweep(double scale, double lo_factor = 1e-4, double hi_factor = 1e1, std::size_t count = 16);

/// Typical coefficient magnitude used to center the default sweep: median of
/// the OLS coefficient magnitudes that are numerically nonzero
/// (>= 1e-8 of the largest).
double coefficient_scale(const Eigen::MatrixXd& ols);

/// Builds Psi (B x K) for the state columns.
Eigen::MatrixXd design_matrix(const MonomialBasis& basis, const Eigen::MatrixXd& states);

/// Per-node bases for a mesh: node n uses the D dofs of each of its neighbors
/// (state index neighbor * D + d). Adjacency must be symmetric and reflexive.
std::vector<MonomialBasis> local_bases(const std::vector<std::vector<std::size_t>>& adjacency,
                                       std::size_t dofs_per_node, int max_degree,
                                       std::size_t cap = 1'000'000);

}  // namespace dynsc::sindy
