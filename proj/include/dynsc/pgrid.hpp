#pragma once

// Clenshaw-Curtis collocation grids (tensor and Smolyak sparse) and the
// Lagrange interpolation weights that map node values to sample values.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dynsc::pgrid {

/// Axis-aligned box of uniformly distributed parameters, with the affine map
/// to the reference cube [-1, 1]^P.
class ParameterSpace {
public:
    ParameterSpace(std::vector<double> lo, std::vector<double> hi);

    std::size_t dims() const noexcept { return lo_.size(); }
    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }

    Eigen::VectorXd to_reference(std::span<const double> lambda) const;
    Eigen::VectorXd from_reference(std::span<const double> xi) const;

    /// Column-wise maps for P x N point matrices.
    Eigen::MatrixXd to_reference(const Eigen::MatrixXd& lambdas) const;
    Eigen::MatrixXd from_reference(const Eigen::MatrixXd& xis) const;

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

/// Level-`level` Clenshaw-Curtis nodes cos((j-1) pi / 2^level), j = 1..2^level+1,
/// in formula order. Values within 1e-15 of 0 or +-1 are snapped so that the
/// nested families compare equal bitwise.
std::vector<double> cc_nodes_1d(int level);

/// Lagrange cardinal polynomial for `nodes[j]` (0-based) evaluated at x.
/// Throws ValidationError when two nodes coincide.
double lagrange_eval(std::span<const double> nodes, std::size_t j, double x);

enum class GridKind { Tensor, Sparse };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& s);

/// One tensor-product term of a grid. For tensor grids `levels` are
/// Clenshaw-Curtis levels (level 0 = the two endpoints). For sparse grids they
/// are Smolyak indices, where index 0 is the single midpoint and index l >= 1
/// is the level-l Clenshaw-Curtis rule.
struct ComponentGrid {
    std::vector<int> levels;
    int weight = 1;
};

/// Immutable set of collocation nodes in [-1, 1]^P plus the combination data
/// needed to evaluate interpolation weights anywhere in the cube.
class CollocationGrid {
public:
    static CollocationGrid tensor(std::vector<int> levels);
    static CollocationGrid sparse(std::size_t dims, int order);

    std::size_t dims() const noexcept { return dims_; }
    GridKind kind() const noexcept { return kind_; }
    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(nodes_.cols()); }

    /// P x J node coordinates.
    const Eigen::MatrixXd& nodes() const noexcept { return nodes_; }
    const std::vector<ComponentGrid>& components() const noexcept { return components_; }

    /// Interpolation weights gamma_j(x) for one point in the cube (length J).
    Eigen::VectorXd weights(std::span<const double> x) const;

    std::string to_json() const;
    static CollocationGrid from_json(const std::string& text);

private:
    struct Component {
        ComponentGrid spec;
        std::vector<std::vector<double>> axes;  // 1D nodes per dimension
        std::vector<std::size_t> node_index;    // flattened tensor index -> global node
    };

    CollocationGrid(std::size_t dims, GridKind kind, int order, std::vector<ComponentGrid> comps);

    std::size_t dims_ = 0;
    GridKind kind_ = GridKind::Tensor;
    int order_ = 0;
    Eigen::MatrixXd nodes_;
    std::vector<ComponentGrid> components_;
    std::vector<Component> terms_;
};

/// Gamma = [gamma_ij] for I sample points, stored I x J.
struct InterpolationMatrix {
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd sample_points;  // P x I, reference coordinates
};

/// Throws ValidationError if any sample lies outside [-1, 1]^P.
InterpolationMatrix interpolation_matrix(const CollocationGrid& grid, const Eigen::MatrixXd& samples);

}  // namespace dynsc::pgrid
