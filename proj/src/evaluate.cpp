#include "gfts/evaluate.hpp"

#include "gfts/depth.hpp"
#include "gfts/error.hpp"
#include "gfts/ingest.hpp"
#include "gfts/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace gfts {

namespace {

constexpr std::uint64_t kIntervalStream = 0x1A7E;
constexpr std::uint64_t kWindowStream = 0x57A7E;

void check_shapes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorKind::ShapeMismatch, "actual and forecast differ in shape");
    if (a.size() == 0) fail(ErrorKind::ShapeMismatch, "no forecast cells to score");
}

FunctionalSeries head(const FunctionalSeries& s, std::size_t n) {
    FunctionalSeries out{s.grid, std::vector<int>(s.years.begin(), s.years.begin() + static_cast<std::ptrdiff_t>(n)),
                         s.values.topRows(static_cast<Eigen::Index>(n)), s.scale};
    return out;
}

template <class F>
auto tagged(const std::string& context, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_context(context);
    }
}

std::string window_tag(std::size_t train_years, const SeriesKey& key) {
    return "window of " + std::to_string(train_years) + " years, series " + key.label();
}

}  // namespace

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::Independent: return "independent";
        case Method::BottomUp: return "bottom_up";
        case Method::OptimalCombination: return "optimal_combination";
        case Method::FMedian: return "fmedian";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : all_methods())
        if (method_name(m) == name) return m;
    fail(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
    return {Method::Independent, Method::BottomUp, Method::OptimalCombination, Method::FMedian};
}

double mafe(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& forecast) {
    check_shapes(actual, forecast);
    return (actual - forecast).cwiseAbs().sum() / static_cast<double>(actual.size());
}

double rmsfe(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& forecast) {
    check_shapes(actual, forecast);
    return std::sqrt((actual - forecast).squaredNorm() / static_cast<double>(actual.size()));
}

double interval_score(double lower, double upper, double actual, double alpha) {
    if (!(lower <= upper)) fail(ErrorKind::InvalidInterval, "interval lower bound exceeds upper bound");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
    double s = upper - lower;
    if (actual < lower) s += 2.0 / alpha * (lower - actual);
    if (actual > upper) s += 2.0 / alpha * (actual - upper);
    return s;
}

double mean_interval_score(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper, const Eigen::MatrixXd& actual,
                           double alpha) {
    check_shapes(actual, lower);
    check_shapes(actual, upper);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < actual.cols(); ++j)
        for (Eigen::Index i = 0; i < actual.rows(); ++i) sum += interval_score(lower(i, j), upper(i, j), actual(i, j), alpha);
    return sum / static_cast<double>(actual.size());
}

double summarize(std::span<const double> values, Summary stat, bool horizon_indexed) {
    if (values.empty()) fail(ErrorKind::InvalidArgument, "cannot summarize an empty list");
    if (stat == Summary::Mean) return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::vector<double> v(values.begin(), values.end());
    if (!horizon_indexed) std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BaseForecasts base_forecasts(const SmoothedDataset& smoothed, std::size_t train_years, int horizons,
                             const ForecastSettings& settings) {
    if (horizons < 1) fail(ErrorKind::InvalidArgument, "at least one horizon is required");
    std::vector<SeriesKey> keys;
    for (const auto& [key, s] : smoothed.series) {
        if (s.n() < train_years) fail(ErrorKind::SeriesTooShort, "series " + key.label() + " is shorter than the window");
        keys.push_back(key);
    }
    std::vector<FpcModel> models(keys.size());
    std::vector<Eigen::MatrixXd> curves(keys.size());
    std::vector<double> mse(keys.size());
    const auto factory = auto_arima_factory(settings.arima);
    parallel_for(keys.size(), settings.threads, [&](std::size_t i) {
        tagged(window_tag(train_years, keys[i]), [&] {
            models[i] = fit_fpca(head(smoothed.series.at(keys[i]), train_years), settings.delta);
            curves[i] = forecast_curves(models[i], factory, horizons).curves;
            const auto e = insample_errors(models[i], factory, 1, 1);
            mse[i] = std::max(e.squaredNorm() / static_cast<double>(e.size()), kVarianceFloor);
            return 0;
        });
    });
    BaseForecasts out;
    out.train_years = train_years;
    out.horizons = horizons;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.curves.emplace(keys[i], std::move(curves[i]));
        out.models.emplace(keys[i], std::move(models[i]));
        out.one_step_mse.emplace(keys[i], mse[i]);
    }
    return out;
}

namespace {

Eigen::VectorXd row_variances(const BaseForecasts& base, const SummingMatrix& s) {
    Eigen::VectorXd v(s.rows());
    for (Eigen::Index r = 0; r < s.rows(); ++r) v[r] = base.one_step_mse.at(s.row_keys[static_cast<std::size_t>(r)]);
    return v;
}

void check_horizons(const BaseForecasts& base, const std::vector<std::vector<SummingMatrix>>& s) {
    if (static_cast<int>(s.size()) < base.horizons) fail(ErrorKind::ShapeMismatch, "too few forecast summing matrices");
}

}  // namespace

std::map<SeriesKey, Eigen::MatrixXd> reconcile_forecasts(const BaseForecasts& base,
                                                         const std::vector<std::vector<SummingMatrix>>& s,
                                                         Method method, Weighting weighting) {
    if (method != Method::BottomUp && method != Method::OptimalCombination)
        fail(ErrorKind::InvalidArgument, "only bottom_up and optimal_combination reconcile");
    check_horizons(base, s);
    const auto& first = s.front().front();
    const auto p = static_cast<Eigen::Index>(s.front().size());
    std::map<SeriesKey, Eigen::MatrixXd> out;
    for (const auto& key : first.row_keys) out.emplace(key, Eigen::MatrixXd(base.horizons, p));
    for (int h = 0; h < base.horizons; ++h)
        for (Eigen::Index z = 0; z < p; ++z) {
            const auto& S = s[static_cast<std::size_t>(h)][static_cast<std::size_t>(z)];
            Eigen::VectorXd rec;
            if (method == Method::BottomUp) {
                Eigen::VectorXd b(S.cols());
                for (Eigen::Index c = 0; c < S.cols(); ++c) b[c] = std::exp(base.curves.at(S.col_keys[static_cast<std::size_t>(c)])(h, z));
                rec = S.entries * b;
            } else {
                Eigen::VectorXd r(S.rows());
                for (Eigen::Index i = 0; i < S.rows(); ++i) r[i] = std::exp(base.curves.at(S.row_keys[static_cast<std::size_t>(i)])(h, z));
                const Reconciler rc(S, weighting, row_variances(base, S));
                rec = rc.apply(r);
            }
            for (Eigen::Index i = 0; i < S.rows(); ++i)
                out.at(S.row_keys[static_cast<std::size_t>(i)])(h, z) = std::log(std::max(rec[i], kRateFloor));
            if (method == Method::BottomUp)
                for (Eigen::Index c = 0; c < S.cols(); ++c) {
                    const auto& key = S.col_keys[static_cast<std::size_t>(c)];
                    out.at(key)(h, z) = base.curves.at(key)(h, z);
                }
        }
    return out;
}

std::map<SeriesKey, Eigen::MatrixXd> method_forecasts(const SmoothedDataset& smoothed, const BaseForecasts& base,
                                                      const std::vector<std::vector<SummingMatrix>>& s, Method method,
                                                      Weighting weighting) {
    switch (method) {
        case Method::Independent: return base.curves;
        case Method::BottomUp:
        case Method::OptimalCombination: return reconcile_forecasts(base, s, method, weighting);
        case Method::FMedian: {
            std::map<SeriesKey, Eigen::MatrixXd> out;
            for (const auto& [key, series] : smoothed.series) {
                const Eigen::VectorXd m = moving_median_forecast(head(series, base.train_years), 1);
                out.emplace(key, m.transpose().replicate(base.horizons, 1));
            }
            return out;
        }
    }
    fail(ErrorKind::InvalidArgument, "unknown method");
}

std::map<SeriesKey, SeriesInterval> method_intervals(const BaseForecasts& base,
                                                     const std::vector<std::vector<SummingMatrix>>& s,
                                                     const std::map<SeriesKey, Eigen::MatrixXd>& points, Method method,
                                                     const IntervalSettings& settings, const ForecastSettings& forecast,
                                                     Weighting weighting, std::vector<std::string>* warnings) {
    if (method == Method::FMedian) fail(ErrorKind::InvalidArgument, "fmedian has no bootstrap intervals");
    const int H = base.horizons;
    const auto factory = auto_arima_factory(forecast.arima);

    std::vector<SeriesKey> keys;
    for (const auto& [key, m] : base.models) keys.push_back(key);
    // errors[i][h - 1]
    std::vector<std::vector<Eigen::MatrixXd>> errors(keys.size());
    parallel_for(keys.size(), forecast.threads, [&](std::size_t i) {
        errors[i] = tagged(window_tag(base.train_years, keys[i]),
                           [&] { return insample_errors_all(base.models.at(keys[i]), factory, H); });
    });
    std::map<SeriesKey, const std::vector<Eigen::MatrixXd>*> errors_of;
    for (std::size_t i = 0; i < keys.size(); ++i) errors_of.emplace(keys[i], &errors[i]);

    std::map<SeriesKey, SeriesInterval> out;
    const auto p = base.curves.begin()->second.cols();
    for (const auto& key : keys) out.emplace(key, SeriesInterval{Eigen::MatrixXd(H, p), Eigen::MatrixXd(H, p)});

    for (int h = 1; h <= H; ++h) {
        const std::uint64_t seed = derive_seed(settings.seed, kIntervalStream, static_cast<std::uint64_t>(h));
        auto store = [&](const SeriesKey& key, const IntervalForecast& f) {
            if (!f.target_met && warnings)
                warnings->push_back(window_tag(base.train_years, key) + ", " + std::string(method_name(method)) +
                                    " h=" + std::to_string(h) + ": no band in range covers " +
                                    format_double(1.0 - settings.alpha) +
                                    " of in-sample errors; tuned to the best attainable coverage");
            out.at(key).lower.row(h - 1) = f.lower.transpose();
            out.at(key).upper.row(h - 1) = f.upper.transpose();
        };
        auto point_of = [&](const SeriesKey& key) -> Eigen::VectorXd { return points.at(key).row(h - 1).transpose(); };
        auto errors_at = [&](const SeriesKey& key) -> const Eigen::MatrixXd& {
            return (*errors_of.at(key))[static_cast<std::size_t>(h - 1)];
        };

        if (method == Method::Independent) {
            for (const auto& key : keys)
                tagged(window_tag(base.train_years, key), [&] {
                    const auto& e = errors_at(key);
                    store(key, make_interval(point_of(key), e, bootstrap_bounds(e, settings.replicates, seed), h,
                                             settings.alpha, settings.kind, settings.shortfall));
                    return 0;
                });
            continue;
        }

        check_horizons(base, s);
        const auto& layer = s[static_cast<std::size_t>(h - 1)];
        const auto& S0 = layer.front();
        const auto& inputs_keys = method == Method::BottomUp ? S0.col_keys : S0.row_keys;
        std::vector<Eigen::MatrixXd> inputs;
        for (const auto& key : inputs_keys)
            inputs.push_back(bootstrap_replicates(base.curves.at(key).row(h - 1).transpose(), errors_at(key),
                                                  settings.replicates, seed));
        std::vector<Reconciler> reconcilers;
        if (method == Method::OptimalCombination)
            for (const auto& S : layer) reconcilers.emplace_back(S, weighting, row_variances(base, S));
        const ReplicateMap map = [&](std::size_t z, const Eigen::MatrixXd& rates) -> Eigen::MatrixXd {
            if (method == Method::BottomUp) return layer[z].entries * rates;
            return reconcilers[z].apply(rates);
        };
        auto reps = reconcile_replicates(inputs, map, S0.row_keys.size());
        if (method == Method::BottomUp)
            for (std::size_t c = 0; c < S0.col_keys.size(); ++c) reps[static_cast<std::size_t>(S0.bottom_rows[c])] = inputs[c];
        for (std::size_t r = 0; r < S0.row_keys.size(); ++r) {
            const auto& key = S0.row_keys[r];
            tagged(window_tag(base.train_years, key), [&] {
                store(key, interval_from_replicates(point_of(key), reps[r], errors_at(key), h, settings.alpha, settings.kind,
                                               settings.shortfall));
                return 0;
            });
        }
    }
    return out;
}

const ScoreCell& BacktestReport::cell(Method m, std::size_t level, int h) const {
    for (const auto& c : cells)
        if (c.method == m && c.level == level && c.horizon == h) return c;
    fail(ErrorKind::UnknownKey, "no score cell for " + std::string(method_name(m)));
}

std::vector<double> BacktestReport::series(Method m, std::size_t level, double ScoreCell::*metric) const {
    std::vector<double> v;
    for (int h = 1; h <= h_max; ++h) v.push_back(cell(m, level, h).*metric);
    return v;
}

BacktestReport run_backtest(const GroupedDataset& dataset, const BacktestPlan& plan) {
    const std::size_t n = dataset.n_years();
    if (plan.h_max < 1) fail(ErrorKind::InvalidArgument, "h_max must be at least 1");
    if (plan.train_years < 15) fail(ErrorKind::SeriesTooShort, "at least 15 training years are required");
    if (plan.train_years >= n) fail(ErrorKind::SeriesTooShort, "no holdout years after the first training window");
    if (plan.methods.empty()) fail(ErrorKind::InvalidArgument, "no methods to evaluate");
    const int H_all = std::min<int>(plan.h_max, static_cast<int>(n - plan.train_years));

    const auto smoothed = smooth_dataset(dataset, plan.smoothing, plan.forecast.threads);
    const auto& keys = dataset.all_keys();
    std::map<SeriesKey, Eigen::MatrixXd> actuals;
    for (const auto& key : keys) {
        const auto& cells = dataset.series(key).cells;
        actuals.emplace(key, plan.score_raw ? raw_log_rates(cells.deaths, cells.exposure) : smoothed.series.at(key).values);
    }

    BacktestReport report;
    report.methods = plan.methods;
    report.h_max = H_all;
    report.has_intervals = plan.with_intervals;
    report.horizon_indexed_median = plan.horizon_indexed_median;
    report.origins.assign(static_cast<std::size_t>(H_all), 0);
    report.warnings = smoothed.warnings;
    for (std::size_t l = 0; l < dataset.scheme().levels.size(); ++l) report.levels.push_back(dataset.scheme().level_name(l));

    // sums[method][key][h - 1]
    struct Sums {
        double abs = 0.0, sq = 0.0, score = 0.0;
        double cells = 0.0;
    };
    std::vector<std::map<SeriesKey, std::vector<Sums>>> sums(plan.methods.size());
    for (auto& m : sums)
        for (const auto& key : keys) m[key].assign(static_cast<std::size_t>(H_all), Sums{});

    for (std::size_t L = plan.train_years; L < n; ++L) {
        const int H = std::min<int>(H_all, static_cast<int>(n - L));
        for (int h = 1; h <= H; ++h) ++report.origins[static_cast<std::size_t>(h - 1)];

        SmoothedDataset window;
        for (const auto& [key, s] : smoothed.series) window.series.emplace(key, head(s, L));
        const auto base = base_forecasts(window, L, H, plan.forecast);
        std::vector<std::vector<SummingMatrix>> S;
        const bool needs_s = std::any_of(plan.methods.begin(), plan.methods.end(), [](Method m) {
            return m == Method::BottomUp || m == Method::OptimalCombination;
        });
        if (needs_s) S = forecast_summing_matrices(dataset.truncated(L), H, plan.forecast.threads, plan.forecast.arima);

        IntervalSettings iv = plan.intervals;
        iv.seed = derive_seed(plan.intervals.seed, kWindowStream, L);

        for (std::size_t mi = 0; mi < plan.methods.size(); ++mi) {
            const Method method = plan.methods[mi];
            const auto points = method_forecasts(window, base, S, method, plan.weighting);
            std::map<SeriesKey, SeriesInterval> intervals;
            if (plan.with_intervals && method != Method::FMedian)
                intervals = method_intervals(base, S, points, method, iv, plan.forecast, plan.weighting, &report.warnings);
            for (const auto& key : keys) {
                const auto& actual = actuals.at(key);
                const auto& fc = points.at(key);
                for (int h = 1; h <= H; ++h) {
                    const Eigen::RowVectorXd a = actual.row(static_cast<Eigen::Index>(L) - 1 + h);
                    const Eigen::RowVectorXd e = a - fc.row(h - 1);
                    auto& cell = sums[mi][key][static_cast<std::size_t>(h - 1)];
                    cell.abs += e.cwiseAbs().sum();
                    cell.sq += e.squaredNorm();
                    cell.cells += static_cast<double>(e.size());
                    if (!intervals.empty()) {
                        const auto& iv_k = intervals.at(key);
                        for (Eigen::Index j = 0; j < a.size(); ++j)
                            cell.score += interval_score(iv_k.lower(h - 1, j), iv_k.upper(h - 1, j), a[j], plan.intervals.alpha);
                    }
                }
            }
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t mi = 0; mi < plan.methods.size(); ++mi)
        for (std::size_t l = 0; l < report.levels.size(); ++l) {
            const auto level_keys = dataset.level_keys(l);
            for (int h = 1; h <= H_all; ++h) {
                ScoreCell c;
                c.method = plan.methods[mi];
                c.level = l;
                c.horizon = h;
                const bool scored = plan.with_intervals && c.method != Method::FMedian;
                for (const auto& key : level_keys) {
                    const auto& s = sums[mi].at(key)[static_cast<std::size_t>(h - 1)];
                    c.mafe += s.abs / s.cells;
                    c.rmsfe += std::sqrt(s.sq / s.cells);
                    c.interval_score += s.score / s.cells;
                }
                const auto m = static_cast<double>(level_keys.size());
                c.mafe /= m;
                c.rmsfe /= m;
                c.interval_score = scored ? c.interval_score / m : nan;
                report.cells.push_back(c);
            }
        }
    return report;
}

namespace {

std::string scaled(double v) { return std::isfinite(v) ? format_double(100.0 * v) : "NA"; }

}  // namespace

void write_report_csv(std::ostream& out, const BacktestReport& report) {
    out << "method,level,horizon,metric,value\n";
    for (const auto& c : report.cells) {
        const auto prefix = std::string(method_name(c.method)) + ',' + report.levels[c.level] + ',' + std::to_string(c.horizon) + ',';
        out << prefix << "mafe," << scaled(c.mafe) << '\n';
        out << prefix << "rmsfe," << scaled(c.rmsfe) << '\n';
        if (report.has_intervals) out << prefix << "interval_score," << scaled(c.interval_score) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const BacktestReport& report) {
    out << "method,level,statistic,value\n";
    const bool hi = report.horizon_indexed_median;
    for (Method m : report.methods)
        for (std::size_t l = 0; l < report.levels.size(); ++l) {
            const auto prefix = std::string(method_name(m)) + ',' + report.levels[l] + ',';
            out << prefix << "mean_rmsfe," << scaled(summarize(report.series(m, l, &ScoreCell::rmsfe), Summary::Mean)) << '\n';
            out << prefix << "median_mafe," << scaled(summarize(report.series(m, l, &ScoreCell::mafe), Summary::Median, hi))
                << '\n';
            if (report.has_intervals) {
                const auto s = report.series(m, l, &ScoreCell::interval_score);
                out << prefix << "mean_score," << scaled(summarize(s, Summary::Mean)) << '\n';
                out << prefix << "median_score," << scaled(summarize(s, Summary::Median, hi)) << '\n';
            }
        }
}

void write_report_markdown(std::ostream& out, const BacktestReport& report,
                           const std::vector<std::pair<std::string, std::string>>& metadata) {
    out << "# Backtest report\n\n";
    for (const auto& [k, v] : metadata) out << "- " << k << ": " << v << '\n';
    out << "- forecasts per horizon:";
    for (std::size_t h = 0; h < report.origins.size(); ++h) out << (h ? ", " : " ") << report.origins[h];
    out << "\n- all values are multiplied by 100\n";

    std::vector<std::pair<std::string, double ScoreCell::*>> metrics{{"MAFE", &ScoreCell::mafe}, {"RMSFE", &ScoreCell::rmsfe}};
    if (report.has_intervals) metrics.emplace_back("Mean interval score", &ScoreCell::interval_score);
    auto fixed = [](double v) {
        if (!std::isfinite(v)) return std::string("NA");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", 100.0 * v);
        return std::string(buf);
    };
    for (const auto& [title, metric] : metrics)
        for (std::size_t l = 0; l < report.levels.size(); ++l) {
            out << "\n## " << title << ", level " << report.levels[l] << "\n\n| h |";
            for (Method m : report.methods) out << ' ' << method_name(m) << " |";
            out << "\n|---|";
            for (std::size_t i = 0; i < report.methods.size(); ++i) out << "---|";
            out << '\n';
            for (int h = 1; h <= report.h_max; ++h) {
                out << "| " << h << " |";
                for (Method m : report.methods) out << ' ' << fixed(report.cell(m, l, h).*metric) << " |";
                out << '\n';
            }
            for (auto [label, stat] : {std::pair{"Mean", Summary::Mean}, std::pair{"Median", Summary::Median}}) {
                out << "| " << label << " |";
                for (Method m : report.methods)
                    out << ' ' << fixed(summarize(report.series(m, l, metric), stat, report.horizon_indexed_median)) << " |";
                out << '\n';
            }
        }
}

}  // namespace gfts
