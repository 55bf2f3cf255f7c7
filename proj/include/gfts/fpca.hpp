#pragma once

#include "gfts/domain.hpp"
#include "gfts/forecaster.hpp"

namespace gfts {

struct FpcModel {
    AgeGrid grid;
    std::vector<int> years;
    Eigen::MatrixXd data;            // n x p, the curves the model was fitted on
    Eigen::VectorXd mean;            // p
    Eigen::MatrixXd eigenfunctions;  // K x p, orthonormal under the trapezoid inner product
    Eigen::VectorXd eigenvalues;     // K, non-increasing
    Eigen::VectorXd all_eigenvalues; // p, clipped at zero
    Eigen::MatrixXd scores;          // n x K
    Eigen::MatrixXd residuals;       // n x p
    double delta = 0.9;
    double total_variance = 0.0;
    bool degenerate = false;

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(data.rows()); }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(data.cols()); }
    [[nodiscard]] std::size_t k() const noexcept { return static_cast<std::size_t>(eigenfunctions.rows()); }

    /// mean + scores * eigenfunctions for one row of scores.
    [[nodiscard]] Eigen::VectorXd curve(const Eigen::VectorXd& score_row) const;
};

/// Empirical FPCA with covariance divisor n - 1, K chosen as the smallest count
/// whose share of the positive eigenvalue mass reaches delta.
[[nodiscard]] FpcModel fit_fpca(const FunctionalSeries& series, double delta = 0.9);

struct CurveForecast {
    Eigen::MatrixXd curves;           // h_max x p
    Eigen::MatrixXd score_means;      // h_max x K
    Eigen::MatrixXd score_variances;  // h_max x K
};

[[nodiscard]] CurveForecast forecast_curves(const FpcModel& model, const ForecasterFactory& factory, int h_max);

/// In-sample h-step errors: for origins zeta = K..n-h (1-based), actual curve
/// at zeta + h minus the forecast from the first zeta scores. M = n - h - K + 1
/// rows in origin order. Throws SampleTooSmall when M < min_rows.
[[nodiscard]] Eigen::MatrixXd insample_errors(const FpcModel& model, const ForecasterFactory& factory, int h,
                                              int min_rows = 5);

/// insample_errors for every h in 1..h_max from a single pass over origins.
[[nodiscard]] std::vector<Eigen::MatrixXd> insample_errors_all(const FpcModel& model,
                                                               const ForecasterFactory& factory, int h_max,
                                                               int min_rows = 5);

}  // namespace gfts
