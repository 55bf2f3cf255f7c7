#pragma once

#include "gfts/arima.hpp"
#include "gfts/intervals.hpp"
#include "gfts/reconcile.hpp"
#include "gfts/smoothing.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gfts {

enum class Method { Independent, BottomUp, OptimalCombination, FMedian };

[[nodiscard]] std::string_view method_name(Method m) noexcept;
/// Accepts the names written by method_name. Throws InvalidArgument.
[[nodiscard]] Method parse_method(std::string_view name);
[[nodiscard]] std::vector<Method> all_methods();

/// Per-cell forecast accuracy over ages and origins.
[[nodiscard]] double mafe(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& forecast);
[[nodiscard]] double rmsfe(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& forecast);

/// Width plus 2/alpha times the distance by which x falls outside [l, u].
[[nodiscard]] double interval_score(double lower, double upper, double actual, double alpha);
[[nodiscard]] double mean_interval_score(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper,
                                         const Eigen::MatrixXd& actual, double alpha);

enum class Summary { Mean, Median };
/// Median ranks the values and averages the middle pair (or takes the middle
/// one). With horizon_indexed the middle positions are taken unsorted.
[[nodiscard]] double summarize(std::span<const double> values, Summary stat, bool horizon_indexed = false);

/// Log-rate point forecasts of every series for horizons 1..H (H x p each),
/// from models fitted on the first `train_years` smoothed curves.
struct BaseForecasts {
    std::size_t train_years = 0;
    int horizons = 0;
    std::map<SeriesKey, Eigen::MatrixXd> curves;
    std::map<SeriesKey, FpcModel> models;
    /// One-step in-sample MSE pooled over ages, floored at kVarianceFloor.
    std::map<SeriesKey, double> one_step_mse;
};

inline constexpr double kVarianceFloor = 1e-10;

struct ForecastSettings {
    double delta = 0.9;
    AutoArimaOptions arima;
    unsigned threads = 1;
};

[[nodiscard]] BaseForecasts base_forecasts(const SmoothedDataset& smoothed, std::size_t train_years, int horizons,
                                           const ForecastSettings& settings);

/// Bottom-up or optimal combination of base forecasts on the rate scale, given
/// forecast summing matrices s[h - 1][z]. Returns log rates for every series.
/// Bottom rows of bottom-up keep the base values bit for bit; reconciled rates
/// at or below zero are floored at kRateFloor before the log.
[[nodiscard]] std::map<SeriesKey, Eigen::MatrixXd> reconcile_forecasts(
    const BaseForecasts& base, const std::vector<std::vector<SummingMatrix>>& s, Method method,
    Weighting weighting = Weighting::WLS);

/// Curves of `method` for horizons 1..H; fmedian repeats the training median.
[[nodiscard]] std::map<SeriesKey, Eigen::MatrixXd> method_forecasts(
    const SmoothedDataset& smoothed, const BaseForecasts& base, const std::vector<std::vector<SummingMatrix>>& s,
    Method method, Weighting weighting = Weighting::WLS);

struct SeriesInterval {
    Eigen::MatrixXd lower;  // H x p
    Eigen::MatrixXd upper;
};

struct IntervalSettings {
    double alpha = 0.2;
    IntervalKind kind = IntervalKind::Pointwise;
    int replicates = 1000;
    std::uint64_t seed = 1;
    Shortfall shortfall = Shortfall::BestAttainable;
};

/// Bootstrap intervals around the forecasts of `method` (fmedian excluded).
/// Replicates share row draws across series, and reconciled methods map each
/// replicate through the same reconciliation as the point forecasts. Bands
/// that fall short of 1 - alpha (Shortfall::BestAttainable) add a warning.
[[nodiscard]] std::map<SeriesKey, SeriesInterval> method_intervals(
    const BaseForecasts& base, const std::vector<std::vector<SummingMatrix>>& s,
    const std::map<SeriesKey, Eigen::MatrixXd>& points, Method method, const IntervalSettings& settings,
    const ForecastSettings& forecast, Weighting weighting = Weighting::WLS,
    std::vector<std::string>* warnings = nullptr);

struct BacktestPlan {
    /// Years in the first training window; later windows add one year each.
    std::size_t train_years = 29;
    int h_max = 10;
    std::vector<Method> methods = all_methods();
    Weighting weighting = Weighting::WLS;
    ForecastSettings forecast;
    SmoothingConfig smoothing;
    bool with_intervals = true;
    IntervalSettings intervals;
    bool horizon_indexed_median = false;
    /// Score against raw log rates instead of the smoothed holdout curves.
    bool score_raw = false;
};

struct ScoreCell {
    Method method = Method::Independent;
    std::size_t level = 0;
    int horizon = 1;
    double mafe = 0.0;
    double rmsfe = 0.0;
    double interval_score = 0.0;  // NaN when not computed
};

struct BacktestReport {
    std::vector<Method> methods;
    std::vector<std::string> levels;
    int h_max = 0;
    /// Forecast origins scored at each horizon, index h - 1.
    std::vector<std::size_t> origins;
    bool has_intervals = false;
    bool horizon_indexed_median = false;
    /// Method-major, then level, then horizon.
    std::vector<ScoreCell> cells;
    std::vector<std::string> warnings;

    [[nodiscard]] const ScoreCell& cell(Method m, std::size_t level, int h) const;
    [[nodiscard]] std::vector<double> series(Method m, std::size_t level, double ScoreCell::*metric) const;
};

/// Expanding-window backtest. Smoothing is curve by curve, so the smoothed
/// panel is computed once and truncated per window.
[[nodiscard]] BacktestReport run_backtest(const GroupedDataset& dataset, const BacktestPlan& plan);

/// Long format: method,level,horizon,metric,value with values times 100.
void write_report_csv(std::ostream& out, const BacktestReport& report);
/// method,level,statistic,value: mean_rmsfe, median_mafe and, with intervals,
/// mean_score and median_score; values times 100.
void write_summary_csv(std::ostream& out, const BacktestReport& report);
/// One table per level: horizons down, methods across, then Mean and Median.
void write_report_markdown(std::ostream& out, const BacktestReport& report,
                           const std::vector<std::pair<std::string, std::string>>& metadata);

}  // namespace gfts
