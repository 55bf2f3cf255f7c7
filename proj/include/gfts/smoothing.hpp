#pragma once

#include "gfts/domain.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gfts {

struct SmoothingConfig {
    double monotone_from_age = 65.0;
    /// nullopt selects lambda by cross-validation over lambda_grid.
    std::optional<double> lambda = 1.0;
    std::vector<double> lambda_grid = default_lambda_grid();
    /// Interior knot count; <= 0 means min(p / 2, 30).
    int basis_knots = 0;
    double huber_epsilon = 1e-4;
    int max_iterations = 200;
    double tolerance = 1e-8;

    /// 13 log-spaced points from 1e-3 to 1e3.
    static std::vector<double> default_lambda_grid();
    void validate(const AgeGrid& grid) const;
};

/// Inverse Poisson variances w = m * E = D; zero-death cells get 0.5.
[[nodiscard]] Eigen::MatrixXd poisson_weights(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposure);

/// Log rates with the continuity correction log((D + 0.5) / E) for D = 0.
[[nodiscard]] Eigen::MatrixXd raw_log_rates(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposure);

struct SmoothResult {
    Eigen::VectorXd theta;
    double lambda = 0.0;
    bool converged = false;
    int iterations = 0;
    /// Smoothed objective after each reweighting step, before the monotone projection.
    std::vector<double> objective_trace;
};

/// Cubic B-spline penalized L1 smoother for one grid. Precomputes the basis so
/// repeated curves on the same grid cost only the reweighting iterations.
class Smoother {
public:
    Smoother(const AgeGrid& grid, SmoothingConfig config);

    /// Cells with zero weight or non-finite y are treated as missing.
    [[nodiscard]] SmoothResult smooth(const Eigen::VectorXd& y, const Eigen::VectorXd& w) const;

    /// Smoothed objective sum w sqrt(r^2 + eps^2) + lambda sum sqrt(d^2 + eps^2).
    [[nodiscard]] double objective(const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& theta, double lambda) const;

    /// Second differences of slopes, (theta_{j+1} - theta_j)/h_j - (theta_j - theta_{j-1})/h_{j-1}.
    [[nodiscard]] const Eigen::MatrixXd& difference_operator() const noexcept { return D_; }
    [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return B_; }
    [[nodiscard]] const SmoothingConfig& config() const noexcept { return config_; }

private:
    SmoothResult fit(const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda) const;
    double select_lambda(const Eigen::VectorXd& y, const Eigen::VectorXd& w) const;
    void project_monotone(Eigen::VectorXd& theta) const;

    AgeGrid grid_;
    SmoothingConfig config_;
    Eigen::MatrixXd B_;   // p x nb
    Eigen::MatrixXd D_;   // (p - 2) x p
    Eigen::MatrixXd DB_;  // (p - 2) x nb
    std::size_t monotone_start_ = 0;
};

[[nodiscard]] SmoothResult smooth_curve(const AgeGrid& grid, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                        const SmoothingConfig& config);

/// Clamped cubic B-spline basis evaluated on the grid, p x (knots + 4).
[[nodiscard]] Eigen::MatrixXd bspline_basis(const std::vector<double>& x, int interior_knots);

/// Unweighted pool-adjacent-violators fit of a non-decreasing sequence.
void pava_non_decreasing(std::span<double> values);

struct SmoothedDataset {
    std::map<SeriesKey, FunctionalSeries> series;  // LogRate
    /// One entry per (key, year) whose reweighting hit the iteration cap.
    std::vector<std::string> warnings;
};

[[nodiscard]] SmoothedDataset smooth_dataset(const GroupedDataset& dataset, const SmoothingConfig& config,
                                             unsigned threads = 1);

}  // namespace gfts
