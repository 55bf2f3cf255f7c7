#include "gfts/depth.hpp"

#include "gfts/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfts {

DepthRanking fm_depth(const FunctionalSeries& series, CdfConvention convention) {
    const auto n = series.values.rows();
    const auto p = series.values.cols();
    if (n < 1) fail(ErrorKind::InvalidArgument, "depth needs at least one curve");
    if (p != static_cast<Eigen::Index>(series.grid.size())) fail(ErrorKind::ShapeMismatch, "values do not match the grid");
    const auto& z = series.grid.ages();
    const double range = series.grid.ages().back() - series.grid.ages().front();

    Eigen::MatrixXd Z(n, p);
    std::vector<double> col(static_cast<std::size_t>(n));
    const double nn = static_cast<double>(n);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = series.values(i, j);
        std::sort(col.begin(), col.end());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = series.values(i, j);
            const auto less = static_cast<double>(std::lower_bound(col.begin(), col.end(), x) - col.begin());
            const auto less_eq = static_cast<double>(std::upper_bound(col.begin(), col.end(), x) - col.begin());
            const double F = convention == CdfConvention::Midrank ? (less + less_eq) / (2.0 * nn) : less_eq / nn;
            Z(i, j) = 1.0 - std::abs(0.5 - F);
        }
    }
    DepthRanking r;
    r.depths.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double integral = 0.0;
        for (Eigen::Index j = 0; j + 1 < p; ++j)
            integral += 0.5 * (Z(i, j) + Z(i, j + 1)) * (z[static_cast<std::size_t>(j + 1)] - z[static_cast<std::size_t>(j)]);
        r.depths[i] = integral / range;
    }
    r.median_index = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if (r.depths[i] > r.depths[static_cast<Eigen::Index>(r.median_index)]) r.median_index = static_cast<std::size_t>(i);
    return r;
}

Eigen::VectorXd moving_median_forecast(const FunctionalSeries& series, int h, CdfConvention convention) {
    if (h < 1) fail(ErrorKind::InvalidArgument, "horizon must be >= 1");
    const auto r = fm_depth(series, convention);
    return series.values.row(static_cast<Eigen::Index>(r.median_index)).transpose();
}

}  // namespace gfts
