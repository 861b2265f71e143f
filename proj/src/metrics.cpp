#include "dynsc/metrics.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>

#include "dynsc/error.hpp"
#include "dynsc/propagate.hpp"

namespace dynsc::metrics {

using integrate::TrajectoryEnsemble;

namespace {

void check_matching(const TrajectoryEnsemble& ref, const TrajectoryEnsemble& sur) {
    if (ref.n_samples() == 0) throw ValidationError("reference", "empty ensemble");
    if (ref.n_samples() != sur.n_samples()) throw ValidationError("surrogate", "sample count differs from reference");
    if (ref.n_records() != sur.n_records()) throw ValidationError("surrogate", "record count differs from reference");
    for (std::size_t k = 0; k < ref.n_records(); ++k) {
        if (std::abs(ref.times[k] - sur.times[k]) > 1e-12 * std::max(1.0, std::abs(ref.times[k]))) {
            throw ValidationError("surrogate", "time grid differs from reference");
        }
    }
    if (ref.state_dim() != sur.state_dim()) throw ValidationError("surrogate", "state dimension differs from reference");
}

std::vector<std::size_t> strided_records(std::size_t n_records, std::size_t stride) {
    if (stride < 1) throw ValidationError("record_stride", "must be >= 1");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n_records; k += stride) out.push_back(k);
    if (out.back() != n_records - 1) out.push_back(n_records - 1);
    return out;
}

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

EmpiricalDistribution EmpiricalDistribution::uniform(Eigen::MatrixXd points) {
    const auto n = points.cols();
    if (n == 0) throw ValidationError("distribution", "empty");
    return {std::move(points), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
}

void EmpiricalDistribution::validate() const {
    if (weights.size() != points.cols()) throw ValidationError("weights", "one weight per point expected");
    if ((weights.array() < 0.0).any()) throw ValidationError("weights", "must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("weights", "must sum to 1");
    if (!points.allFinite()) throw ValidationError("points", "must be finite");
}

double phi_max(const TrajectoryEnsemble& reference) {
    if (reference.n_samples() == 0) throw ValidationError("reference", "empty ensemble");
    double best = 0.0;
    for (const auto& s : reference.states) {
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            const double n = s.col(k).norm();
            if (std::isfinite(n)) best = std::max(best, n);
        }
    }
    return best;
}

ErrorSeries trajectory_errors(const TrajectoryEnsemble& reference, const TrajectoryEnsemble& surrogate,
                              std::optional<double> normalization) {
    check_matching(reference, surrogate);
    ErrorSeries out;
    out.times = reference.times;
    out.phi_max = normalization ? *normalization : phi_max(reference);
    if (!(out.phi_max > 0.0)) throw ValidationError("phi_max", "must be > 0");
    const std::size_t I = reference.n_samples();
    out.error_avg.assign(reference.n_records(), 0.0);
    out.error_max.assign(reference.n_records(), 0.0);
    for (std::size_t k = 0; k < reference.n_records(); ++k) {
        double sum = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            const auto col = static_cast<Eigen::Index>(k);
            const double e = (reference.states[i].col(col) - surrogate.states[i].col(col)).norm() / out.phi_max;
            sum += e;
            mx = std::isnan(e) ? e : std::max(mx, e);
        }
        out.error_avg[k] = sum / static_cast<double>(I);
        out.error_max[k] = mx;
    }
    return out;
}

EmpiricalDistribution state_distribution(const TrajectoryEnsemble& ens, std::size_t record,
                                         std::span<const std::size_t> rows, std::span<const double> scale) {
    if (record >= ens.n_records()) throw ValidationError("record", "out of range");
    if (!scale.empty() && scale.size() != (rows.empty() ? ens.state_dim() : rows.size())) {
        throw ValidationError("scale", "one factor per selected component expected");
    }
    const auto dim = static_cast<Eigen::Index>(rows.empty() ? ens.state_dim() : rows.size());
    Eigen::MatrixXd pts(dim, static_cast<Eigen::Index>(ens.n_samples()));
    for (std::size_t i = 0; i < ens.n_samples(); ++i) {
        const auto col = ens.states[i].col(static_cast<Eigen::Index>(record));
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double v = rows.empty() ? col[d] : col[static_cast<Eigen::Index>(rows[static_cast<std::size_t>(d)])];
            pts(d, static_cast<Eigen::Index>(i)) = scale.empty() ? v : v * scale[static_cast<std::size_t>(d)];
        }
    }
    return EmpiricalDistribution::uniform(std::move(pts));
}

DistanceSeries distribution_error_series(const TrajectoryEnsemble& reference, const TrajectoryEnsemble& surrogate,
                                         std::size_t record_stride, std::size_t threads) {
    check_matching(reference, surrogate);
    DistanceSeries out;
    out.records = strided_records(reference.n_records(), record_stride);
    out.distance.resize(out.records.size());
    for (std::size_t k : out.records) out.times.push_back(reference.times[k]);
    propagate::parallel_for(out.records.size(), threads, [&](std::size_t r) {
        const std::size_t k = out.records[r];
        out.distance[r] = wasserstein1(state_distribution(reference, k), state_distribution(surrogate, k));
    });
    return out;
}

NodeDistanceField node_distribution_errors(const TrajectoryEnsemble& reference, const TrajectoryEnsemble& surrogate,
                                           std::size_t nodes, std::size_t record_stride, double scale_u,
                                           double scale_v, std::size_t threads) {
    check_matching(reference, surrogate);
    if (reference.state_dim() != 2 * nodes) throw ValidationError("nodes", "state is not [u; v] over the given nodes");
    NodeDistanceField out;
    out.records = strided_records(reference.n_records(), record_stride);
    for (std::size_t k : out.records) out.times.push_back(reference.times[k]);
    out.distance.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(out.records.size()));
    const std::array<double, 2> scale = {scale_u, scale_v};
    propagate::parallel_for(out.records.size(), threads, [&](std::size_t r) {
        const std::size_t k = out.records[r];
        for (std::size_t n = 0; n < nodes; ++n) {
            const std::array<std::size_t, 2> rows = {n, nodes + n};
            out.distance(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r)) =
                wasserstein1(state_distribution(reference, k, rows, scale), state_distribution(surrogate, k, rows, scale));
        }
    });
    return out;
}

FieldErrors field_errors(const TrajectoryEnsemble& reference, const TrajectoryEnsemble& surrogate, std::size_t offset,
                         std::size_t nodes) {
    check_matching(reference, surrogate);
    if (offset + nodes > reference.state_dim()) throw ValidationError("field", "rows exceed the state dimension");
    const auto N = static_cast<Eigen::Index>(nodes);
    const auto K = static_cast<Eigen::Index>(reference.n_records());
    FieldErrors out{Eigen::MatrixXd::Zero(N, K), Eigen::MatrixXd::Zero(N, K)};
    for (std::size_t i = 0; i < reference.n_samples(); ++i) {
        const Eigen::MatrixXd diff = (reference.states[i].middleRows(static_cast<Eigen::Index>(offset), N) -
                                      surrogate.states[i].middleRows(static_cast<Eigen::Index>(offset), N))
                                         .cwiseAbs();
        out.avg += diff;
        const auto nan = diff.array().isNaN() || out.max.array().isNaN();
        out.max = nan.select(Eigen::MatrixXd::Constant(N, K, std::numeric_limits<double>::quiet_NaN()),
                             out.max.cwiseMax(diff));
    }
    out.avg /= static_cast<double>(reference.n_samples());
    return out;
}

KdeResult kde_1d(std::span<const double> samples, std::span<const double> eval_points) {
    if (samples.size() < 2) throw ValidationError("samples", "need at least two samples");
    KdeResult out;
    const auto n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    if (!(sd > 0.0)) {
        out.point_mass = true;
        out.location = samples.front();
        return out;
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    out.bandwidth = 0.9 * spread * std::pow(n, -0.2);
    const double norm = 1.0 / (n * out.bandwidth * std::sqrt(2.0 * std::numbers::pi));
    out.density.reserve(eval_points.size());
    for (double x : eval_points) {
        double acc = 0.0;
        for (double s : samples) {
            const double z = (x - s) / out.bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        out.density.push_back(acc * norm);
    }
    return out;
}

}  // namespace dynsc::metrics
