#include "../support/oracles.hpp"

#include "gfts/error.hpp"
#include "gfts/fpca.hpp"

#include <doctest.h>

#include <random>

using namespace gfts;

namespace {

FunctionalSeries make_series(const Eigen::MatrixXd& values, std::vector<double> ages) {
    FunctionalSeries s;
    s.grid = AgeGrid(std::move(ages));
    for (Eigen::Index t = 0; t < values.rows(); ++t) s.years.push_back(1990 + static_cast<int>(t));
    s.values = values;
    return s;
}

// Forecaster returning the true continuation of a fixed path.
ForecasterFactory perfect_factory(std::vector<std::vector<double>> paths) {
    return [paths](std::span<const double> full) -> ScoreForecaster {
        const std::vector<double>* match = nullptr;
        for (const auto& p : paths)
            if (std::equal(full.begin(), full.end(), p.begin())) match = &p;
        REQUIRE(match != nullptr);
        return [match](std::span<const double> history, int h) {
            ScoreForecast f;
            for (int i = 0; i < h; ++i) {
                const auto idx = history.size() + static_cast<std::size_t>(i);
                f.mean.push_back(idx < match->size() ? (*match)[idx] : 0.0);
                f.variance.push_back(0.0);
            }
            return f;
        };
    };
}

double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w) {
    return (a.array() * b.array() * w.array()).sum();
}

}  // namespace

TEST_SUITE("fpca") {

TEST_CASE("identical curves are degenerate") {
    Eigen::MatrixXd v(4, 3);
    v.rowwise() = Eigen::RowVector3d(-5, -4, -2);
    const auto m = fit_fpca(make_series(v, {0, 1, 2}));
    CHECK(m.degenerate);
    CHECK(m.k() == 1);
    CHECK(m.eigenvalues[0] == 0.0);
    CHECK(m.scores.isZero());
    CHECK(m.residuals.isZero());
    CHECK(m.mean.isApprox(Eigen::Vector3d(-5, -4, -2)));
    const auto f = forecast_curves(m, naive_factory(), 3);
    for (int h = 0; h < 3; ++h) CHECK(f.curves.row(h).isApprox(m.mean.transpose()));
}

TEST_CASE("rank one data") {
    const std::vector<double> ages{0, 10, 20, 40, 80};
    Eigen::VectorXd mu(5), g(5);
    mu << -7, -6, -5, -3, -1;
    g << 0.5, 0.2, -0.1, 0.4, 1.0;
    const std::vector<double> a{-2, -1, 0.5, 0, 1, 1.5};
    Eigen::MatrixXd v(6, 5);
    for (Eigen::Index t = 0; t < 6; ++t) v.row(t) = (mu + a[static_cast<std::size_t>(t)] * g).transpose();
    const auto m = fit_fpca(make_series(v, ages));
    CHECK(m.k() == 1);
    const auto w = m.grid.trapezoid_weights();
    const Eigen::VectorXd phi = m.eigenfunctions.row(0).transpose();
    CHECK(inner(phi, phi, w) == doctest::Approx(1.0).epsilon(1e-10));
    const double cosine = inner(phi, g, w) / std::sqrt(inner(g, g, w));
    CHECK(std::abs(cosine) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(phi.sum() >= 0.0);
    const Eigen::MatrixXd recon = (m.scores * m.eigenfunctions).rowwise() + m.mean.transpose();
    CHECK((recon - v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eigenvalues match an independent Jacobi solve") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    Eigen::MatrixXd v(5, 4);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
    const std::vector<double> ages{0, 1, 3, 6};
    const auto m = fit_fpca(make_series(v, ages), 0.999);

    // explicit weighted covariance, sqrt(w_i) c_ij sqrt(w_j)
    const std::vector<double> w{0.5, 1.5, 2.5, 1.5};
    std::vector<double> mean(4, 0.0);
    for (int t = 0; t < 5; ++t)
        for (int j = 0; j < 4; ++j) mean[j] += v(t, j) / 5.0;
    std::vector<std::vector<double>> c(4, std::vector<double>(4, 0.0));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            for (int t = 0; t < 5; ++t) c[i][j] += (v(t, i) - mean[i]) * (v(t, j) - mean[j]);
            c[i][j] *= std::sqrt(w[i] * w[j]) / 4.0;
        }
    const auto ev = oracle::jacobi_eigenvalues(c);
    for (int k = 0; k < 4; ++k) CHECK(m.all_eigenvalues[k] == doctest::Approx(std::max(ev[k], 0.0)).epsilon(1e-9));
    double explained = 0.0;
    for (Eigen::Index k = 0; k < m.eigenvalues.size(); ++k) explained += m.eigenvalues[k];
    CHECK(explained / m.total_variance >= 0.999);
}

TEST_CASE("model invariants on random smooth data") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    const int n = 30, p = 21;
    std::vector<double> ages;
    for (int j = 0; j < p; ++j) ages.push_back(5.0 * j);
    Eigen::MatrixXd v(n, p);
    for (int t = 0; t < n; ++t) {
        const double a = z(rng), b = z(rng), c = 0.1 * z(rng);
        for (int j = 0; j < p; ++j) {
            const double x = ages[j] / 100.0;
            v(t, j) = -8 + 6 * x + a * x + b * x * x + c * std::sin(7 * x) + 0.01 * z(rng);
        }
    }
    const auto m = fit_fpca(make_series(v, ages));
    const auto w = m.grid.trapezoid_weights();
    const auto K = static_cast<Eigen::Index>(m.k());
    for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j < K; ++j)
            CHECK(inner(m.eigenfunctions.row(i).transpose(), m.eigenfunctions.row(j).transpose(), w) ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
        CHECK(std::abs(m.scores.col(i).mean()) < 1e-8);
        const double var = (m.scores.col(i).array() - m.scores.col(i).mean()).square().sum() / (n - 1);
        CHECK(var == doctest::Approx(m.eigenvalues[i]).epsilon(1e-6));
        CHECK(m.eigenfunctions.row(i).sum() >= 0.0);
        if (i > 0) CHECK(m.eigenvalues[i] <= m.eigenvalues[i - 1]);
    }
    // K is minimal
    double share = 0.0;
    for (Eigen::Index k = 0; k + 1 < K; ++k) share += m.eigenvalues[k];
    CHECK(share / m.total_variance < m.delta);
    CHECK((share + m.eigenvalues[K - 1]) / m.total_variance >= m.delta);
    const Eigen::MatrixXd recon = ((m.scores * m.eigenfunctions).rowwise() + m.mean.transpose()) + m.residuals;
    CHECK((recon - v).cwiseAbs().maxCoeff() < 1e-10);

    // cumulative share is non-decreasing and reaches one
    double cum = 0.0, prev = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
        cum += m.all_eigenvalues[k];
        CHECK(cum / m.total_variance >= prev);
        prev = cum / m.total_variance;
    }
    CHECK(prev == doctest::Approx(1.0));

    // projection property
    const Eigen::MatrixXd stripped = (m.scores * m.eigenfunctions).rowwise() + m.mean.transpose();
    const auto m2 = fit_fpca(make_series(stripped, ages), 0.999999);
    REQUIRE(m2.k() >= m.k());
    for (Eigen::Index k = 0; k < K; ++k) {
        CHECK(m2.eigenvalues[k] == doctest::Approx(m.eigenvalues[k]).epsilon(1e-8));
        CHECK((m2.eigenfunctions.row(k) - m.eigenfunctions.row(k)).cwiseAbs().maxCoeff() < 1e-8);
    }

    // determinism
    const auto m3 = fit_fpca(make_series(v, ages));
    CHECK(m3.eigenfunctions == m.eigenfunctions);
}

TEST_CASE("forecasts: linear trend continuation, naive identity, linearity") {
    const std::vector<double> ages{0, 25, 50, 75, 100};
    Eigen::VectorXd mu(5), g(5);
    mu << -6, -7, -5, -3, -1;
    g << 1, 0.5, 0.5, 0.2, 0.1;
    const int n = 8;
    std::vector<double> a(n);
    for (int t = 0; t < n; ++t) a[t] = 0.3 * (t - 3.5);  // mean zero linear trend
    Eigen::MatrixXd v(n, 5);
    for (int t = 0; t < n; ++t) v.row(t) = (mu + a[t] * g).transpose();
    const auto m = fit_fpca(make_series(v, ages));
    REQUIRE(m.k() == 1);

    const std::vector<double> col(m.scores.data(), m.scores.data() + n);
    std::vector<double> extended = col;
    const double step = col[1] - col[0];
    for (int i = 1; i <= 3; ++i) extended.push_back(col.back() + i * step);
    const auto f = forecast_curves(m, perfect_factory({extended}), 3);
    for (int h = 1; h <= 3; ++h) {
        const Eigen::VectorXd expected = mu + (a[n - 1] + 0.3 * h) * g;
        CHECK((f.curves.row(h - 1).transpose() - expected).cwiseAbs().maxCoeff() < 1e-10);
    }

    const auto naive = forecast_curves(m, naive_factory(), 4);
    const Eigen::VectorXd last = m.curve(m.scores.row(n - 1).transpose());
    for (int h = 0; h < 4; ++h) CHECK((naive.curves.row(h).transpose() - last).cwiseAbs().maxCoeff() < 1e-12);

    // superposing two forecasters' score paths superposes the curves around the mean
    const Eigen::MatrixXd combined_scores = naive.score_means.topRows(3) + f.score_means;
    const Eigen::MatrixXd combined = (combined_scores * m.eigenfunctions).rowwise() + m.mean.transpose();
    const Eigen::MatrixXd sum = naive.curves.topRows(3) + f.curves - m.mean.transpose().replicate(3, 1);
    CHECK((combined - sum).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("in-sample errors") {
    const std::vector<double> ages{0, 25, 50, 75, 100};
    Eigen::VectorXd mu(5), g(5);
    mu << -6, -7, -5, -3, -1;
    g << 1, 0.5, 0.5, 0.2, 0.1;
    const int n = 12;
    std::vector<double> a(n);
    for (int t = 0; t < n; ++t) a[t] = 0.25 * t - 1.375;
    Eigen::MatrixXd v(n, 5);
    for (int t = 0; t < n; ++t) v.row(t) = (mu + a[t] * g).transpose();
    const auto m = fit_fpca(make_series(v, ages));
    REQUIRE(m.k() == 1);
    const std::vector<double> col(m.scores.data(), m.scores.data() + n);

    SUBCASE("perfect forecaster gives zero errors") {
        const auto e = insample_errors(m, perfect_factory({col}), 2);
        CHECK(e.rows() == n - 2 - 1 + 1);
        CHECK(e.cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("naive forecaster on a linear score gives h c phi") {
        const double c = col[1] - col[0];
        for (int h = 1; h <= 3; ++h) {
            const auto e = insample_errors(m, naive_factory(), h);
            CHECK(e.rows() == n - h);
            for (Eigen::Index r = 0; r < e.rows(); ++r)
                CHECK((e.row(r) - h * c * m.eigenfunctions.row(0)).cwiseAbs().maxCoeff() < 1e-10);
        }
        const auto all = insample_errors_all(m, naive_factory(), 3);
        for (int h = 1; h <= 3; ++h) CHECK(all[h - 1] == insample_errors(m, naive_factory(), h));
    }
    SUBCASE("too few rows") {
        CHECK_THROWS_AS((void)insample_errors(m, naive_factory(), 8), Error);
    }
}

TEST_CASE("row count M = n - h - K + 1") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Eigen::MatrixXd v(39, 6);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
    auto m = fit_fpca(make_series(v, {0, 1, 2, 3, 4, 5}), 0.8);
    REQUIRE(m.k() >= 3);
    // keep exactly three components
    m.eigenfunctions.conservativeResize(3, Eigen::NoChange);
    m.eigenvalues.conservativeResize(3);
    m.scores.conservativeResize(Eigen::NoChange, 3);
    CHECK(insample_errors(m, naive_factory(), 1).rows() == 36);
}

}
