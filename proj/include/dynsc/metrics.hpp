#pragma once

// Error metrics between reference and surrogate ensembles, exact 1-Wasserstein
// distances between empirical distributions, and 1D kernel density estimates.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynsc/integrate.hpp"

namespace dynsc::metrics {

/// Weighted point cloud; points are the columns of `points`.
struct EmpiricalDistribution {
    Eigen::MatrixXd points;   // dim x n
    Eigen::VectorXd weights;  // n, nonnegative, sums to 1

    static EmpiricalDistribution uniform(Eigen::MatrixXd points);
    std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
    /// Throws ValidationError unless the weights are a probability vector.
    void validate() const;
};

struct ErrorSeries {
    std::vector<double> times;
    std::vector<double> error_avg;
    std::vector<double> error_max;
    double phi_max = 0.0;
};

/// Largest Euclidean state norm over all samples and records (NaN records skipped).
double phi_max(const integrate::TrajectoryEnsemble& reference);

/// Per record: mean and max over samples of ||phi_i - phi_hat_i|| / phi_max.
/// `normalization` defaults to phi_max(reference).
ErrorSeries trajectory_errors(const integrate::TrajectoryEnsemble& reference,
                              const integrate::TrajectoryEnsemble& surrogate,
                              std::optional<double> normalization = std::nullopt);

/// Exact optimal transport cost with Euclidean ground distance.
double wasserstein1(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

/// Equal-count, equal-weight scalar samples: mean |x_(k) - y_(k)| after sorting.
double wasserstein1_1d(std::vector<double> x, std::vector<double> y);

/// Minimum-cost perfect matching on a square cost matrix; returns the
/// column assigned to each row.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

/// Empirical state distribution of an ensemble at one record. With `rows`
/// only those state components are used; `scale` multiplies them.
EmpiricalDistribution state_distribution(const integrate::TrajectoryEnsemble& ens, std::size_t record,
                                         std::span<const std::size_t> rows = {}, std::span<const double> scale = {});

/// W1 between the reference and surrogate state distributions at every
/// `record_stride`-th record (the last record is always included).
struct DistanceSeries {
    std::vector<std::size_t> records;
    std::vector<double> times;
    std::vector<double> distance;
};
DistanceSeries distribution_error_series(const integrate::TrajectoryEnsemble& reference,
                                         const integrate::TrajectoryEnsemble& surrogate,
                                         std::size_t record_stride = 1, std::size_t threads = 1);

/// Per mesh node (u, v) distributions; distance(node, k) for the chosen records.
struct NodeDistanceField {
    std::vector<std::size_t> records;
    std::vector<double> times;
    Eigen::MatrixXd distance;  // nodes x records.size()
};
NodeDistanceField node_distribution_errors(const integrate::TrajectoryEnsemble& reference,
                                           const integrate::TrajectoryEnsemble& surrogate, std::size_t nodes,
                                           std::size_t record_stride = 1, double scale_u = 1.0, double scale_v = 1.0,
                                           std::size_t threads = 1);

/// Sample-averaged and maximum absolute error of one field of a mesh state,
/// rows [offset, offset + nodes), in model units: nodes x records.
struct FieldErrors {
    Eigen::MatrixXd avg;
    Eigen::MatrixXd max;
};
FieldErrors field_errors(const integrate::TrajectoryEnsemble& reference,
                         const integrate::TrajectoryEnsemble& surrogate, std::size_t offset, std::size_t nodes);

struct KdeResult {
    std::vector<double> density;
    double bandwidth = 0.0;
    /// Set when all samples coincide; `density` is then empty.
    bool point_mass = false;
    double location = 0.0;
};

/// Gaussian KDE with Silverman's bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5).
KdeResult kde_1d(std::span<const double> samples, std::span<const double> eval_points);

}  // namespace dynsc::metrics
