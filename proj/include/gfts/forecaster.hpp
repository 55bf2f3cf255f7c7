#pragma once

#include <functional>
#include <span>
#include <vector>

namespace gfts {

/// h-step means and forecast-error variances, index i is horizon i + 1.
struct ScoreForecast {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Forecasts h steps past the end of `history`.
using ScoreForecaster = std::function<ScoreForecast(std::span<const double> history, int h)>;

/// Builds a forecaster for one score column. The full column is passed so a
/// model can be fitted once and then re-filtered on any prefix.
using ForecasterFactory = std::function<ScoreForecaster(std::span<const double> full_series)>;

/// Last value for every horizon; variance h times the mean squared increment.
[[nodiscard]] ForecasterFactory naive_factory();

}  // namespace gfts
