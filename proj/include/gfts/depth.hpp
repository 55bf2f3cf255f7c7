#pragma once

#include "gfts/domain.hpp"

namespace gfts {

enum class CdfConvention { Midrank, LessOrEqual };

struct DepthRanking {
    Eigen::VectorXd depths;
    std::size_t median_index = 0;
};

/// Fraiman-Muniz depth: trapezoid integral of 1 - |1/2 - F_z(x_i(z))| over the
/// grid, divided by the grid range. Ties in depth go to the smallest index.
[[nodiscard]] DepthRanking fm_depth(const FunctionalSeries& series,
                                    CdfConvention convention = CdfConvention::Midrank);

/// The training-sample functional median, used for every horizon.
[[nodiscard]] Eigen::VectorXd moving_median_forecast(const FunctionalSeries& series, int h,
                                                     CdfConvention convention = CdfConvention::Midrank);

}  // namespace gfts
