#pragma once

// Learned dynamics r(phi) ~ A psi(phi), either global or split into
// per-mesh-node blocks that each see only a local neighborhood.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynsc/integrate.hpp"
#include "dynsc/sindy.hpp"

namespace dynsc::surrogate {

enum class Provenance { NodeLearned, SampleInterpolated };

/// Rows `outputs` of the dynamics are coeffs * basis(state).
struct Block {
    sindy::MonomialBasis basis;
    std::vector<std::size_t> outputs;
    sindy::SparseCoefficients coeffs;
    double threshold = 0.0;
    double validation_residual = 0.0;
};

class SurrogateDynamics {
public:
    SurrogateDynamics() = default;
    /// `dim` is the rate dimension: the state dimension for first-order
    /// models, the displacement dimension for second-order ones.
    SurrogateDynamics(integrate::Order order, std::size_t dim, std::vector<Block> blocks, Provenance provenance);

    integrate::Order order() const noexcept { return order_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    Provenance provenance() const noexcept { return provenance_; }
    std::size_t active_count() const;

    /// out = A psi(x), where x is the full state (first order) or displacement (second order).
    void eval(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
    Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

    /// Integrable form; parameters are ignored since they are folded into A.
    integrate::DynamicsFn as_dynamics() const;

    /// Same structure with every coefficient zero (no active terms).
    SurrogateDynamics zeroed() const;

    /// JSON with one entry per block: {basis: {exponents, variable_map}, outputs, values: [[s, b, value]]}.
    std::string to_json() const;

private:
    // Flat evaluation program over all blocks. Monomial slot 0 is the
    // constant; slot s > 0 is value[parent[s]] * x[variable[s]].
    struct Compiled {
        std::vector<std::uint32_t> parent;
        std::vector<std::uint32_t> variable;
        std::vector<std::uint32_t> row_begin;  // rows.size() + 1 offsets into slot/coef
        std::vector<std::uint32_t> row_output;
        std::vector<std::uint32_t> slot;
        std::vector<double> coef;
    };
    void compile();

    integrate::Order order_ = integrate::Order::First;
    std::size_t dim_ = 0;
    std::vector<Block> blocks_;
    Provenance provenance_ = Provenance::NodeLearned;
    Compiled compiled_;
};

/// Entrywise sum_j gamma_j A_j for models sharing bases and shapes; the
/// active mask is the union of the node masks. Throws on basis mismatch.
SurrogateDynamics interpolate_coefficients(std::span<const SurrogateDynamics> node_models,
                                           const Eigen::VectorXd& gamma_row);

}  // namespace dynsc::surrogate
