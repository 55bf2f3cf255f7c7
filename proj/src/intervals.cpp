#include "gfts/intervals.hpp"

#include "gfts/error.hpp"
#include "gfts/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gfts {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xB0075;

using CoverageFn = std::function<double(double)>;

double tune_to(const CoverageFn& coverage, double target, const TuningRange& range) {
    double lo = range.minimum, hi = range.maximum;
    if (coverage(lo) >= target) return lo;
    const double top = coverage(hi);
    if (top < target)
        fail(ErrorKind::Unattainable, "coverage " + std::to_string(top) + " at the largest tuning value is below " +
                                          std::to_string(target));
    double c_lo = coverage(lo);
    while (hi - lo > range.tolerance) {
        const double mid = 0.5 * (lo + hi);
        const double c = coverage(mid);
        // coverage is monotone in the tuning value
        if (c < c_lo) fail(ErrorKind::InvalidArgument, "coverage decreased while widening the band");
        if (c >= target) {
            hi = mid;
        } else {
            lo = mid;
            c_lo = c;
        }
    }
    return hi;
}

double tune(const CoverageFn& coverage, double alpha, const TuningRange& range) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
    return tune_to(coverage, 1.0 - alpha, range);
}

}  // namespace

double quantile_type7(std::vector<double> values, double prob) {
    if (values.empty()) fail(ErrorKind::InvalidArgument, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::size_t replicate_row(std::uint64_t seed, std::size_t b, std::size_t rows) {
    std::mt19937_64 rng(derive_seed(seed, kBootstrapStream, b));
    const auto row = static_cast<std::size_t>(unit_interval(rng()) * static_cast<double>(rows));
    return std::min(row, rows - 1);
}

BootstrapBounds percentile_bounds(const Eigen::MatrixXd& deviations) {
    const auto p = deviations.cols();
    BootstrapBounds b{Eigen::VectorXd(p), Eigen::VectorXd(p)};
    std::vector<double> col(static_cast<std::size_t>(deviations.rows()));
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < deviations.rows(); ++i) col[static_cast<std::size_t>(i)] = deviations(i, j);
        b.lower[j] = std::min(0.0, quantile_type7(col, 0.025));
        b.upper[j] = std::max(0.0, quantile_type7(col, 0.975));
    }
    return b;
}

Eigen::MatrixXd bootstrap_replicates(const Eigen::VectorXd& point, const Eigen::MatrixXd& errors, int replicates,
                                     std::uint64_t seed) {
    if (errors.cols() != point.size()) fail(ErrorKind::ShapeMismatch, "errors and point curve differ in length");
    if (errors.rows() < 1) fail(ErrorKind::SampleTooSmall, "no error rows to resample");
    Eigen::MatrixXd out(replicates, point.size());
    const auto rows = static_cast<std::size_t>(errors.rows());
    for (int b = 0; b < replicates; ++b)
        out.row(b) = point.transpose() + errors.row(static_cast<Eigen::Index>(replicate_row(seed, static_cast<std::size_t>(b), rows)));
    return out;
}

BootstrapBounds bootstrap_bounds(const Eigen::MatrixXd& errors, int replicates, std::uint64_t seed) {
    if (errors.rows() < 5) fail(ErrorKind::SampleTooSmall, "at least 5 error curves are required");
    if (replicates < 100) fail(ErrorKind::InvalidArgument, "at least 100 bootstrap replicates are required");
    return percentile_bounds(bootstrap_replicates(Eigen::VectorXd::Zero(errors.cols()), errors, replicates, seed));
}

double uniform_coverage(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double phi) {
    if (errors.rows() == 0) return 1.0;
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < errors.rows(); ++i) {
        bool ok = true;
        for (Eigen::Index j = 0; j < errors.cols() && ok; ++j)
            ok = phi * b.lower[j] <= errors(i, j) && errors(i, j) <= phi * b.upper[j];
        inside += ok;
    }
    return static_cast<double>(inside) / static_cast<double>(errors.rows());
}

double pointwise_coverage(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double pi) {
    if (errors.size() == 0) return 1.0;
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < errors.rows(); ++i)
        for (Eigen::Index j = 0; j < errors.cols(); ++j)
            inside += pi * b.lower[j] <= errors(i, j) && errors(i, j) <= pi * b.upper[j];
    return static_cast<double>(inside) / static_cast<double>(errors.size());
}

double tune_uniform(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double alpha, const TuningRange& range) {
    return tune([&](double phi) { return uniform_coverage(errors, b, phi); }, alpha, range);
}

double tune_pointwise(const Eigen::MatrixXd& errors, const BootstrapBounds& b, double alpha,
                      const TuningRange& range) {
    return tune([&](double pi) { return pointwise_coverage(errors, b, pi); }, alpha, range);
}

IntervalForecast make_interval(const Eigen::VectorXd& point, const Eigen::MatrixXd& errors,
                               const BootstrapBounds& bounds, int h, double alpha, IntervalKind kind,
                               Shortfall shortfall) {
    IntervalForecast f;
    f.horizon = h;
    f.alpha = alpha;
    f.kind = kind;
    f.point = point;
    const CoverageFn coverage = [&](double c) {
        return kind == IntervalKind::Uniform ? uniform_coverage(errors, bounds, c) : pointwise_coverage(errors, bounds, c);
    };
    const TuningRange range;
    if (shortfall == Shortfall::BestAttainable) {
        if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
        const double best = coverage(range.maximum);
        f.target_met = best >= 1.0 - alpha;
        f.tuning = tune_to(coverage, f.target_met ? 1.0 - alpha : best, range);
    } else {
        f.tuning = tune(coverage, alpha, range);
    }
    f.lower = point + f.tuning * bounds.lower;
    f.upper = point + f.tuning * bounds.upper;
    return f;
}

IntervalForecast forecast_intervals(const FpcModel& model, const ForecasterFactory& factory, int h, double alpha,
                                    IntervalKind kind, int replicates, std::uint64_t seed) {
    const auto errors = insample_errors(model, factory, h);
    const auto bounds = bootstrap_bounds(errors, replicates, seed);
    const Eigen::VectorXd point = forecast_curves(model, factory, h).curves.row(h - 1).transpose();
    return make_interval(point, errors, bounds, h, alpha, kind);
}

std::vector<Eigen::MatrixXd> reconcile_replicates(const std::vector<Eigen::MatrixXd>& inputs, const ReplicateMap& map,
                                                  std::size_t outputs) {
    if (inputs.empty()) fail(ErrorKind::InvalidArgument, "no replicate inputs");
    const auto B = inputs.front().rows();
    const auto p = inputs.front().cols();
    for (const auto& m : inputs)
        if (m.rows() != B || m.cols() != p) fail(ErrorKind::ShapeMismatch, "replicate matrices differ in shape");
    std::vector<Eigen::MatrixXd> out(outputs, Eigen::MatrixXd(B, p));
    Eigen::MatrixXd rates(static_cast<Eigen::Index>(inputs.size()), B);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (std::size_t s = 0; s < inputs.size(); ++s) rates.row(static_cast<Eigen::Index>(s)) = inputs[s].col(j).array().exp().transpose();
        const Eigen::MatrixXd rec = map(static_cast<std::size_t>(j), rates);
        if (rec.rows() != static_cast<Eigen::Index>(outputs) || rec.cols() != B)
            fail(ErrorKind::ShapeMismatch, "replicate map returned the wrong shape");
        for (std::size_t s = 0; s < outputs; ++s)
            out[s].col(j) = rec.row(static_cast<Eigen::Index>(s)).transpose().array().max(kRateFloor).log();
    }
    return out;
}

IntervalForecast interval_from_replicates(const Eigen::VectorXd& point, const Eigen::MatrixXd& replicates,
                                          const Eigen::MatrixXd& own_errors, int h, double alpha, IntervalKind kind,
                                          Shortfall shortfall) {
    const Eigen::MatrixXd dev = replicates.rowwise() - point.transpose();
    return make_interval(point, own_errors, percentile_bounds(dev), h, alpha, kind, shortfall);
}

}  // namespace gfts
