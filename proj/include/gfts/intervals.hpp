#pragma once

#include "gfts/fpca.hpp"

#include <cstdint>
#include <functional>

namespace gfts {

enum class IntervalKind { Uniform, Pointwise };

struct IntervalForecast {
    int horizon = 1;
    Eigen::VectorXd point;  // LogRate
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double alpha = 0.2;
    IntervalKind kind = IntervalKind::Pointwise;
    double tuning = 1.0;
    /// False when no tuning value in range reached 1 - alpha (see Shortfall).
    bool target_met = true;
};

/// What make_interval does when the target coverage is out of reach: throw
/// Unattainable, or settle for the smallest tuning value that attains the
/// best coverage available in range.
enum class Shortfall { Throw, BestAttainable };

struct BootstrapBounds {
    Eigen::VectorXd lower;  // <= 0
    Eigen::VectorXd upper;  // >= 0
};

/// Type-7 (linear interpolation) sample quantile of unsorted values.
[[nodiscard]] double quantile_type7(std::vector<double> values, double prob);

/// Row index drawn for replicate b. Every series bootstrapped with the same
/// seed draws the same uniform, which couples replicates across series.
[[nodiscard]] std::size_t replicate_row(std::uint64_t seed, std::size_t b, std::size_t rows);

/// Whole-curve resampling of error rows; per-age 2.5% and 97.5% quantiles,
/// clamped so lower <= 0 <= upper.
[[nodiscard]] BootstrapBounds bootstrap_bounds(const Eigen::MatrixXd& errors, int replicates, std::uint64_t seed);

/// Per-age 2.5% / 97.5% quantiles of deviation rows, clamped around zero.
[[nodiscard]] BootstrapBounds percentile_bounds(const Eigen::MatrixXd& deviations);

/// Fraction of rows inside [phi l, phi u] at every age.
[[nodiscard]] double uniform_coverage(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double phi);
/// Fraction of (row, age) cells inside [pi l, pi u].
[[nodiscard]] double pointwise_coverage(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double pi);

struct TuningRange {
    double minimum = 1e-4;
    double maximum = 100.0;
    double tolerance = 1e-4;
};

/// Smallest bisection value whose coverage reaches 1 - alpha. Unattainable
/// when the maximum does not.
[[nodiscard]] double tune_uniform(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double alpha,
                                  const TuningRange& range = {});
[[nodiscard]] double tune_pointwise(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double alpha,
                                    const TuningRange& range = {});

[[nodiscard]] IntervalForecast make_interval(const Eigen::VectorXd& point, const Eigen::MatrixXd& errors,
                                             const BootstrapBounds& bounds, int h, double alpha, IntervalKind kind,
                                             Shortfall shortfall = Shortfall::Throw);

[[nodiscard]] IntervalForecast forecast_intervals(const FpcModel& model, const ForecasterFactory& factory, int h,
                                                  double alpha, IntervalKind kind, int replicates, std::uint64_t seed);

/// Replicate curves point + errors[row_b] for b < replicates, B x p.
[[nodiscard]] Eigen::MatrixXd bootstrap_replicates(const Eigen::VectorXd& point, const Eigen::MatrixXd& errors,
                                                   int replicates, std::uint64_t seed);

/// Maps rate-scale inputs (inputs x B) at one age to all series (rows x B).
using ReplicateMap = std::function<Eigen::MatrixXd(std::size_t age, const Eigen::MatrixXd& rates)>;

/// Exponentiates LogRate replicates (one B x p matrix per input series),
/// applies `map` age by age and returns LogRate replicates for every output
/// series. Reconciled values <= 0 are floored before the log.
[[nodiscard]] std::vector<Eigen::MatrixXd> reconcile_replicates(const std::vector<Eigen::MatrixXd>& inputs,
                                                                const ReplicateMap& map, std::size_t outputs);

/// Interval around a reconciled point from its reconciled replicates; the
/// tuning constant is calibrated on the series' own in-sample errors.
[[nodiscard]] IntervalForecast interval_from_replicates(const Eigen::VectorXd& point, const Eigen::MatrixXd& replicates,
                                                        const Eigen::MatrixXd& own_errors, int h, double alpha,
                                                        IntervalKind kind, Shortfall shortfall = Shortfall::Throw);

/// Smallest rate kept before taking logs of reconciled replicates.
inline constexpr double kRateFloor = 1e-12;

}  // namespace gfts
