#include "dynsc/surrogate.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "dynsc/error.hpp"

namespace dynsc::surrogate {

SurrogateDynamics::SurrogateDynamics(integrate::Order order, std::size_t dim, std::vector<Block> blocks,
                                     Provenance provenance)
    : order_(order), dim_(dim), blocks_(std::move(blocks)), provenance_(provenance) {
    std::vector<bool> covered(dim_, false);
    for (const auto& b : blocks_) {
        if (b.coeffs.outputs() != static_cast<Eigen::Index>(b.outputs.size()) ||
            b.coeffs.terms() != static_cast<Eigen::Index>(b.basis.size())) {
            throw ValidationError("surrogate", "coefficient shape does not match block");
        }
        for (std::size_t o : b.outputs) {
            if (o >= dim_ || covered[o]) throw ValidationError("surrogate", "block outputs overlap or exceed dimension");
            covered[o] = true;
        }
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        throw ValidationError("surrogate", "blocks do not cover every output");
    }
    compile();
}

void SurrogateDynamics::compile() {
    Compiled c;
    c.parent.push_back(0);
    c.variable.push_back(0);
    c.row_begin.push_back(0);
    for (const auto& block : blocks_) {
        const auto& basis = block.basis;
        std::set<std::size_t> needed;
        for (Eigen::Index s = 0; s < block.coeffs.outputs(); ++s) {
            for (Eigen::Index b = 0; b < block.coeffs.terms(); ++b) {
                if (!block.coeffs.active(s, b)) continue;
                for (auto m = static_cast<std::size_t>(b); m != 0; m = basis.parent(m)) needed.insert(m);
            }
        }
        // Ascending basis order puts every parent before its children.
        std::vector<std::uint32_t> slot_of(basis.size(), 0);
        for (std::size_t m : needed) {
            slot_of[m] = static_cast<std::uint32_t>(c.parent.size());
            c.parent.push_back(slot_of[basis.parent(m)]);
            c.variable.push_back(static_cast<std::uint32_t>(basis.variable_map()[basis.factor(m)]));
        }
        for (Eigen::Index s = 0; s < block.coeffs.outputs(); ++s) {
            for (Eigen::Index b = 0; b < block.coeffs.terms(); ++b) {
                if (!block.coeffs.active(s, b)) continue;
                c.slot.push_back(slot_of[static_cast<std::size_t>(b)]);
                c.coef.push_back(block.coeffs.values(s, b));
            }
            c.row_output.push_back(static_cast<std::uint32_t>(block.outputs[static_cast<std::size_t>(s)]));
            c.row_begin.push_back(static_cast<std::uint32_t>(c.slot.size()));
        }
    }
    compiled_ = std::move(c);
}

std::size_t SurrogateDynamics::active_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.coeffs.active_count();
    return n;
}

void SurrogateDynamics::eval(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    thread_local std::vector<double> vals;
    const auto& c = compiled_;
    out.resize(static_cast<Eigen::Index>(dim_));
    vals.resize(c.parent.size());
    const double* xs = x.data();
    vals[0] = 1.0;
    for (std::size_t s = 1; s < vals.size(); ++s) vals[s] = vals[c.parent[s]] * xs[c.variable[s]];
    for (std::size_t r = 0; r < c.row_output.size(); ++r) {
        double acc = 0.0;
        for (std::uint32_t t = c.row_begin[r]; t < c.row_begin[r + 1]; ++t) acc += c.coef[t] * vals[c.slot[t]];
        out[c.row_output[r]] = acc;
    }
}

Eigen::VectorXd SurrogateDynamics::eval(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out;
    eval(x, out);
    return out;
}

integrate::DynamicsFn SurrogateDynamics::as_dynamics() const {
    return {order_, dim_, [self = *this](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
                self.eval(x, out);
            }};
}

SurrogateDynamics SurrogateDynamics::zeroed() const {
    auto blocks = blocks_;
    for (auto& b : blocks) {
        b.coeffs = sindy::SparseCoefficients::zeros(b.coeffs.outputs(), b.coeffs.terms());
        b.threshold = 0.0;
        b.validation_residual = 0.0;
    }
    return SurrogateDynamics(order_, dim_, std::move(blocks), provenance_);
}

std::string SurrogateDynamics::to_json() const {
    nlohmann::json j;
    j["order"] = order_ == integrate::Order::First ? "first" : "second";
    j["dim"] = dim_;
    j["provenance"] = provenance_ == Provenance::NodeLearned ? "node-learned" : "sample-interpolated";
    auto& blocks = j["blocks"] = nlohmann::json::array();
    for (const auto& b : blocks_) {
        nlohmann::json jb;
        jb["basis"] = {{"exponents", b.basis.exponents()}, {"variable_map", b.basis.variable_map()}};
        jb["outputs"] = b.outputs;
        jb["threshold"] = b.threshold;
        auto& values = jb["values"] = nlohmann::json::array();
        for (Eigen::Index s = 0; s < b.coeffs.outputs(); ++s) {
            for (Eigen::Index t = 0; t < b.coeffs.terms(); ++t) {
                if (b.coeffs.active(s, t)) values.push_back({s, t, b.coeffs.values(s, t)});
            }
        }
        blocks.push_back(std::move(jb));
    }
    return j.dump();
}

SurrogateDynamics interpolate_coefficients(std::span<const SurrogateDynamics> node_models,
                                           const Eigen::VectorXd& gamma_row) {
    if (node_models.empty()) throw ValidationError("node_models", "empty");
    if (static_cast<std::size_t>(gamma_row.size()) != node_models.size()) {
        throw ValidationError("gamma_row", "length does not match the number of node models");
    }
    const auto& first = node_models.front();
    for (const auto& m : node_models) {
        if (m.order() != first.order() || m.dim() != first.dim() || m.blocks().size() != first.blocks().size()) {
            throw ValidationError("node_models", "structure mismatch");
        }
        for (std::size_t k = 0; k < m.blocks().size(); ++k) {
            if (!(m.blocks()[k].basis == first.blocks()[k].basis) || m.blocks()[k].outputs != first.blocks()[k].outputs) {
                throw ValidationError("node_models", "basis mismatch in block " + std::to_string(k));
            }
        }
    }
    std::vector<Block> blocks = first.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        auto& c = blocks[k].coeffs;
        c = sindy::SparseCoefficients::zeros(c.outputs(), c.terms());
        for (std::size_t j = 0; j < node_models.size(); ++j) {
            const auto& cj = node_models[j].blocks()[k].coeffs;
            const double g = gamma_row[static_cast<Eigen::Index>(j)];
            if (g != 0.0) c.values += g * cj.values;
            c.active = c.active.array() || cj.active.array();
        }
        blocks[k].threshold = 0.0;
        blocks[k].validation_residual = 0.0;
    }
    return SurrogateDynamics(first.order(), first.dim(), std::move(blocks), Provenance::SampleInterpolated);
}

}  // namespace dynsc::surrogate
