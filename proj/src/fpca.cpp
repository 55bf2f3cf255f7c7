#include "gfts/fpca.hpp"

#include "gfts/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfts {

ForecasterFactory naive_factory() {
    return [](std::span<const double>) -> ScoreForecaster {
        return [](std::span<const double> history, int h) {
            if (history.empty()) fail(ErrorKind::SeriesTooShort, "naive forecast needs one observation");
            double msq = 0.0;
            for (std::size_t t = 1; t < history.size(); ++t) {
                const double d = history[t] - history[t - 1];
                msq += d * d;
            }
            if (history.size() > 1) msq /= static_cast<double>(history.size() - 1);
            ScoreForecast f;
            for (int i = 1; i <= h; ++i) {
                f.mean.push_back(history.back());
                f.variance.push_back(i * msq);
            }
            return f;
        };
    };
}

Eigen::VectorXd FpcModel::curve(const Eigen::VectorXd& score_row) const {
    return mean + eigenfunctions.transpose() * score_row;
}

FpcModel fit_fpca(const FunctionalSeries& series, double delta) {
    series.validate();
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
    const auto n = series.values.rows();
    const auto p = series.values.cols();
    if (n < 3) fail(ErrorKind::SeriesTooShort, "FPCA needs at least 3 curves");

    FpcModel m;
    m.grid = series.grid;
    m.years = series.years;
    m.data = series.values;
    m.delta = delta;
    m.mean = series.values.colwise().mean().transpose();
    const Eigen::MatrixXd centered = series.values.rowwise() - m.mean.transpose();
    const Eigen::VectorXd weights = series.grid.trapezoid_weights();

    const double scale = std::max(1.0, series.values.cwiseAbs().maxCoeff());
    if (centered.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
        m.degenerate = true;
        m.eigenfunctions = Eigen::MatrixXd::Constant(1, p, 1.0 / std::sqrt(weights.sum()));
        m.eigenvalues = Eigen::VectorXd::Zero(1);
        m.all_eigenvalues = Eigen::VectorXd::Zero(p);
        m.scores = Eigen::MatrixXd::Zero(n, 1);
        m.residuals = centered;
        return m;
    }

    const Eigen::VectorXd root_w = weights.cwiseSqrt();
    const Eigen::MatrixXd scaled = centered * root_w.asDiagonal();
    const Eigen::MatrixXd cov = scaled.transpose() * scaled / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) fail(ErrorKind::NoConvergence, "covariance eigendecomposition failed");

    // Eigen returns ascending order
    Eigen::VectorXd values = eig.eigenvalues().reverse();
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double top = std::max(values[0], 0.0);
    for (Eigen::Index k = 0; k < p; ++k)
        if (values[k] <= 1e-12 * top) values[k] = 0.0;
    m.all_eigenvalues = values;
    m.total_variance = values.sum();

    Eigen::Index K = 1;
    double cumulative = values[0];
    while (K < p && values[K] > 0.0 && cumulative / m.total_variance < delta) cumulative += values[K++];

    m.eigenvalues = values.head(K);
    m.eigenfunctions.resize(K, p);
    for (Eigen::Index k = 0; k < K; ++k) {
        Eigen::VectorXd phi = vectors.col(k).cwiseQuotient(root_w);
        const double sum = phi.sum();
        bool flip = sum < 0.0;
        if (std::abs(sum) <= 1e-12 * phi.cwiseAbs().sum()) {
            for (Eigen::Index j = 0; j < p; ++j)
                if (std::abs(phi[j]) > 1e-12 * phi.cwiseAbs().maxCoeff()) {
                    flip = phi[j] < 0.0;
                    break;
                }
        }
        if (flip) phi = -phi;
        m.eigenfunctions.row(k) = phi.transpose();
    }
    m.scores = centered * weights.asDiagonal() * m.eigenfunctions.transpose();
    m.residuals = centered - m.scores * m.eigenfunctions;
    return m;
}

CurveForecast forecast_curves(const FpcModel& model, const ForecasterFactory& factory, int h_max) {
    if (h_max < 1) fail(ErrorKind::InvalidArgument, "h_max must be >= 1");
    const auto K = static_cast<Eigen::Index>(model.k());
    CurveForecast out;
    out.score_means.resize(h_max, K);
    out.score_variances.resize(h_max, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::VectorXd col = model.scores.col(k);
        const std::span<const double> s(col.data(), static_cast<std::size_t>(col.size()));
        try {
            const auto f = factory(s)(s, h_max);
            for (int h = 0; h < h_max; ++h) {
                out.score_means(h, k) = f.mean[static_cast<std::size_t>(h)];
                out.score_variances(h, k) = f.variance[static_cast<std::size_t>(h)];
            }
        } catch (const Error& e) {
            throw e.with_context("component " + std::to_string(k + 1));
        }
    }
    out.curves = (out.score_means * model.eigenfunctions).rowwise() + model.mean.transpose();
    return out;
}

std::vector<Eigen::MatrixXd> insample_errors_all(const FpcModel& model, const ForecasterFactory& factory,
                                                 int h_max, int min_rows) {
    if (h_max < 1) fail(ErrorKind::InvalidArgument, "h_max must be >= 1");
    const int n = static_cast<int>(model.n());
    const int K = static_cast<int>(model.k());
    const auto p = static_cast<Eigen::Index>(model.p());
    const int rows_needed = n - h_max - K + 1;
    if (rows_needed < min_rows)
        fail(ErrorKind::SampleTooSmall, "in-sample error sample M = " + std::to_string(rows_needed) +
                                            " is below " + std::to_string(min_rows));

    // forecast score paths per origin zeta (1-based history length), up to h_max ahead
    std::vector<Eigen::MatrixXd> paths(static_cast<std::size_t>(n - K));  // (n - zeta) x K per origin
    for (int zeta = K; zeta < n; ++zeta) paths[static_cast<std::size_t>(zeta - K)] =
        Eigen::MatrixXd::Zero(std::min(h_max, n - zeta), K);
    for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd col = model.scores.col(k);
        const std::span<const double> full(col.data(), static_cast<std::size_t>(n));
        const auto forecaster = factory(full);
        for (int zeta = K; zeta < n; ++zeta) {
            const int steps = std::min(h_max, n - zeta);
            try {
                const auto f = forecaster(full.first(static_cast<std::size_t>(zeta)), steps);
                auto& path = paths[static_cast<std::size_t>(zeta - K)];
                for (int i = 0; i < steps; ++i) path(i, k) = f.mean[static_cast<std::size_t>(i)];
            } catch (const Error& e) {
                throw e.with_context("component " + std::to_string(k + 1) + " origin " + std::to_string(zeta));
            }
        }
    }

    std::vector<Eigen::MatrixXd> errors(static_cast<std::size_t>(h_max));
    for (int h = 1; h <= h_max; ++h) {
        const int M = n - h - K + 1;
        Eigen::MatrixXd e(M, p);
        for (int zeta = K; zeta <= n - h; ++zeta) {
            const Eigen::VectorXd score = paths[static_cast<std::size_t>(zeta - K)].row(h - 1).transpose();
            e.row(zeta - K) = model.data.row(zeta + h - 1) - model.curve(score).transpose();
        }
        errors[static_cast<std::size_t>(h - 1)] = std::move(e);
    }
    return errors;
}

Eigen::MatrixXd insample_errors(const FpcModel& model, const ForecasterFactory& factory, int h, int min_rows) {
    if (h < 1) fail(ErrorKind::InvalidArgument, "h must be >= 1");
    const int M = static_cast<int>(model.n()) - h - static_cast<int>(model.k()) + 1;
    if (M < min_rows)
        fail(ErrorKind::SampleTooSmall,
             "in-sample error sample M = " + std::to_string(M) + " is below " + std::to_string(min_rows));
    // same origins, restricted to a single horizon
    const int n = static_cast<int>(model.n());
    const int K = static_cast<int>(model.k());
    const auto p = static_cast<Eigen::Index>(model.p());
    Eigen::MatrixXd scores(M, K);
    for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd col = model.scores.col(k);
        const std::span<const double> full(col.data(), static_cast<std::size_t>(n));
        const auto forecaster = factory(full);
        for (int zeta = K; zeta <= n - h; ++zeta) {
            const auto f = forecaster(full.first(static_cast<std::size_t>(zeta)), h);
            scores(zeta - K, k) = f.mean[static_cast<std::size_t>(h - 1)];
        }
    }
    Eigen::MatrixXd e(M, p);
    for (int zeta = K; zeta <= n - h; ++zeta)
        e.row(zeta - K) = model.data.row(zeta + h - 1) - model.curve(scores.row(zeta - K).transpose()).transpose();
    return e;
}

}  // namespace gfts
