#pragma once

#include "gfts/forecaster.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace gfts {

struct KpssResult {
    double statistic = 0.0;
    int lags = 0;
    double critical_value_5pct = 0.463;
    bool reject = false;
};

/// Level-stationarity KPSS test with a Bartlett long-run variance and
/// floor(4 (n / 100)^(1/4)) lags.
[[nodiscard]] KpssResult kpss_level_test(std::span<const double> x);

/// Smallest d <= d_max whose d-th difference does not reject; d_max if all do.
[[nodiscard]] int select_d(std::span<const double> x, int d_max = 2);

[[nodiscard]] std::vector<double> difference(std::span<const double> x, int d);

/// Inverse of difference(): `heads[i]` is the first value of the i-th difference.
[[nodiscard]] std::vector<double> integrate(std::span<const double> dx, std::span<const double> heads);

/// (1 - sum ar_i B^i)(1 - B)^d (x_t - mu t^d-ish) = (1 + sum ma_i B^i) w_t.
/// The constant is stored as `intercept` = mu (1 - sum ar) on the d-th difference.
struct ArimaModel {
    int p = 0;
    int d = 0;
    int q = 0;
    bool has_intercept = false;
    double intercept = 0.0;
    std::vector<double> ar;
    std::vector<double> ma;
    double sigma2 = 0.0;
    double log_likelihood = 0.0;
    double aicc = 0.0;
    std::size_t fitted_on = 0;
    bool converged = true;

    /// Mean of the d-th difference implied by the intercept.
    [[nodiscard]] double mean() const;
};

/// Exact Gaussian maximum likelihood on the d-th difference. A series whose
/// difference is constant yields sigma2 = 0 and an infinite likelihood.
[[nodiscard]] ArimaModel fit_arima(std::span<const double> x, int p, int d, int q, bool with_intercept);

struct AutoArimaOptions {
    int max_p = 5;
    int max_q = 5;
    int d_max = 2;
    bool stepwise = true;
};

[[nodiscard]] ArimaModel auto_arima(std::span<const double> x, const AutoArimaOptions& options = {});

/// Means from the exact finite-sample predictor of the fitted process,
/// variances sigma2 * sum of squared psi-weights of the integrated model.
[[nodiscard]] ScoreForecast forecast(const ArimaModel& model, std::span<const double> x, int h);

/// Exact log-likelihood of the d-th difference of x under fixed coefficients
/// and sigma2 profiled out; exposed for tests.
[[nodiscard]] double arima_log_likelihood(std::span<const double> w, const std::vector<double>& ar,
                                          const std::vector<double>& ma, double mean, double* sigma2_out = nullptr);

/// Fits auto_arima once on the full series and re-filters each prefix with the
/// fixed model; with `refit` the order is re-selected on every prefix.
[[nodiscard]] ForecasterFactory auto_arima_factory(AutoArimaOptions options = {}, bool refit = false);

}  // namespace gfts
