#pragma once

#include "gfts/arima.hpp"
#include "gfts/domain.hpp"

#include <Eigen/QR>

namespace gfts {

/// Exposure-ratio summing matrix for one age and one (observed or forecast) year.
/// Rows follow GroupedDataset::all_keys(), columns GroupedDataset::bottom_keys().
struct SummingMatrix {
    std::vector<SeriesKey> row_keys;
    std::vector<SeriesKey> col_keys;
    Eigen::MatrixXd entries;
    std::size_t age_index = 0;
    /// 0-based year index; >= n for forecast matrices.
    std::size_t year_index = 0;
    /// Row holding each bottom series (its identity row), in column order.
    std::vector<Eigen::Index> bottom_rows;

    [[nodiscard]] Eigen::Index rows() const noexcept { return entries.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return entries.cols(); }
};

[[nodiscard]] SummingMatrix build_summing_matrix(const GroupedDataset& dataset, std::size_t t, std::size_t z);

/// Forecast summing matrices: result[h - 1][z] for h = 1..h_max. Each ratio
/// series is forecast by auto ARIMA, clamped to [0, 1] and the row is
/// renormalized to sum to one. Identity rows are copied.
[[nodiscard]] std::vector<std::vector<SummingMatrix>> forecast_summing_matrices(const GroupedDataset& dataset,
                                                                                int h_max, unsigned threads = 1,
                                                                                const AutoArimaOptions& options = {});

[[nodiscard]] std::vector<SummingMatrix> forecast_summing_matrix(const GroupedDataset& dataset, int h,
                                                                 unsigned threads = 1);

/// base must list the bottom series in column order.
[[nodiscard]] Eigen::VectorXd bottom_up(const SummingMatrix& s, std::span<const SeriesKey> keys,
                                        const Eigen::VectorXd& base);
[[nodiscard]] Eigen::VectorXd bottom_up(const SummingMatrix& s, const Eigen::VectorXd& base);

enum class Weighting { OLS, WLS };

/// Pre-factorized optimal combination S (S' W^-1 S)^-1 S' W^-1 for one summing matrix.
class Reconciler {
public:
    Reconciler(const SummingMatrix& s, Weighting weighting, const Eigen::VectorXd& variances = {});

    /// Reconciled values for every row; `base` may hold several columns.
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& base) const;
    /// Bottom-level coefficients beta.
    [[nodiscard]] Eigen::MatrixXd coefficients(const Eigen::MatrixXd& base) const;

private:
    Eigen::MatrixXd s_;
    Eigen::VectorXd root_inv_w_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

/// base must list every series in row order. variances are used for WLS only.
[[nodiscard]] Eigen::VectorXd optimal_combination(const SummingMatrix& s, std::span<const SeriesKey> keys,
                                                  const Eigen::VectorXd& base, Weighting weighting,
                                                  const Eigen::VectorXd& variances = {});
[[nodiscard]] Eigen::VectorXd optimal_combination(const SummingMatrix& s, const Eigen::VectorXd& base,
                                                  Weighting weighting, const Eigen::VectorXd& variances = {});

/// Max over aggregate rows of |v_g - sum_b S[g, b] v_b|, with v in row order.
[[nodiscard]] double aggregation_residual(const SummingMatrix& s, const Eigen::VectorXd& values);

}  // namespace gfts
