#include "fixtures.hpp"

#include "gfts/error.hpp"
#include "gfts/smoothing.hpp"

#include <doctest.h>

#include <random>

using namespace gfts;

namespace {

AgeGrid grid_0_to(int last, int step) {
    std::vector<double> z;
    for (int a = 0; a <= last; a += step) z.push_back(a);
    return AgeGrid(z);
}

// Gradient of the smoothed objective with respect to the fitted values when
// the basis is the identity; zero at the unconstrained optimum.
Eigen::VectorXd objective_gradient(const Smoother& s, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& theta, double lambda, double eps) {
    const auto& D = s.difference_operator();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double r = theta[j] - y[j];
        g[j] += w[j] * r / std::sqrt(r * r + eps * eps);
    }
    const Eigen::VectorXd d = D * theta;
    Eigen::VectorXd dd(d.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) dd[k] = lambda * d[k] / std::sqrt(d[k] * d[k] + eps * eps);
    g += D.transpose() * dd;
    return g;
}

}  // namespace

TEST_SUITE("smoothing") {

TEST_CASE("poisson weights") {
    Eigen::MatrixXd d(1, 3), e(1, 3);
    d << 100, 0, 5;
    e << 10000, 40, 250;
    const auto w = poisson_weights(d, e);
    CHECK(w(0, 0) == doctest::Approx(100));
    CHECK(w(0, 1) == 0.5);
    CHECK(w(0, 2) == doctest::Approx(5));
    const auto y = raw_log_rates(d, e);
    CHECK(y(0, 0) == doctest::Approx(std::log(0.01)));
    CHECK(y(0, 1) == doctest::Approx(std::log(0.5 / 40)));
}

TEST_CASE("clamped cubic basis reproduces constants and lines") {
    std::vector<double> z;
    for (int a = 0; a <= 100; a += 5) z.push_back(a);
    const auto B = bspline_basis(z, 10);
    CHECK(B.cols() == 14);
    for (Eigen::Index r = 0; r < B.rows(); ++r) CHECK(B.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((B.array() >= -1e-15).all());
    // Greville abscissae give exact linear reproduction
    Eigen::MatrixXd BtB = B.transpose() * B;
    Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    const Eigen::VectorXd c = BtB.ldlt().solve(B.transpose() * zv);
    CHECK((B * c - zv).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pava") {
    std::vector<double> v{1, 3, 2, 2, 5, 4};
    pava_non_decreasing(v);
    CHECK(v == std::vector<double>{1, 7.0 / 3, 7.0 / 3, 7.0 / 3, 4.5, 4.5});
}

TEST_CASE("noise-free line is reproduced") {
    const auto grid = grid_0_to(100, 5);
    Eigen::VectorXd y(21), w = Eigen::VectorXd::Ones(21);
    for (Eigen::Index j = 0; j < 21; ++j) y[j] = -9.0 + 0.08 * grid[static_cast<std::size_t>(j)];
    SmoothingConfig cfg;
    cfg.lambda = 1e-3;
    const auto r = smooth_curve(grid, y, w, cfg);
    CHECK((r.theta - y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("blip above the monotone age is removed") {
    const auto grid = grid_0_to(100, 5);
    Eigen::VectorXd y(21), w = Eigen::VectorXd::Constant(21, 50.0);
    for (Eigen::Index j = 0; j < 21; ++j) y[j] = -9.0 + 0.08 * grid[static_cast<std::size_t>(j)];
    y[16] -= 1.5;  // age 80
    for (double lambda : {1e-3, 1.0, 100.0}) {
        SmoothingConfig cfg;
        cfg.lambda = lambda;
        const auto r = smooth_curve(grid, y, w, cfg);
        for (Eigen::Index j = 13; j + 1 < 21; ++j) CHECK(r.theta[j + 1] >= r.theta[j]);
        CHECK(r.theta.allFinite());
    }
}

TEST_CASE("large lambda on three points gives the best L1 line") {
    const AgeGrid grid({0, 1, 2});
    Eigen::VectorXd y(3), w = Eigen::VectorXd::Ones(3);
    y << 0, 1, 0;
    SmoothingConfig cfg;
    cfg.lambda = 1e3;
    cfg.monotone_from_age = 2;
    cfg.max_iterations = 2000;
    cfg.tolerance = 1e-14;
    const Smoother s(grid, cfg);
    const auto r = s.smooth(y, w);

    // brute force over lines a + b z, where the roughness term vanishes
    double best = 1e300, best_a = 0, best_b = 0;
    for (int i = -400; i <= 400; ++i)
        for (int k = -400; k <= 400; ++k) {
            const double a = i * 0.005, b = k * 0.005;
            const double f = std::abs(y[0] - a) + std::abs(y[1] - a - b) + std::abs(y[2] - a - 2 * b);
            if (f < best) {
                best = f;
                best_a = a;
                best_b = b;
            }
        }
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(r.theta[j] - (best_a + best_b * j)) < 1e-3);
    const double exact = std::abs(y[0] - r.theta[0]) + std::abs(y[1] - r.theta[1]) + std::abs(y[2] - r.theta[2]);
    CHECK(exact <= best + 1e-3);
}

TEST_CASE("stationarity, descent, scale equivariance and weight monotonicity on random curves") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> wdist(0.5, 20.0);
    const auto grid = grid_0_to(14, 2);  // 8 points: identity basis
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd y(8), w(8);
        for (Eigen::Index j = 0; j < 8; ++j) {
            y[j] = -5 + 0.2 * j + noise(rng);
            w[j] = wdist(rng);
        }
        SmoothingConfig cfg;
        cfg.lambda = 2.0;
        cfg.monotone_from_age = 14;
        cfg.huber_epsilon = 1e-3;
        cfg.max_iterations = 5000;
        cfg.tolerance = 1e-15;
        const Smoother s(grid, cfg);
        const auto r = s.smooth(y, w);
        REQUIRE(s.basis().cols() == 8);

        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);

        const auto g = objective_gradient(s, y, w, r.theta, 2.0, 1e-3);
        CHECK(g.cwiseAbs().maxCoeff() < 1e-3 * w.sum());

        SmoothingConfig scaled = cfg;
        scaled.lambda = 2.0 * 7.5;
        const auto r2 = Smoother(grid, scaled).smooth(y, w * 7.5);
        CHECK((r2.theta - r.theta).cwiseAbs().maxCoeff() < 1e-6);

        const Eigen::Index j = static_cast<Eigen::Index>(rng() % 8);
        Eigen::VectorXd w_up = w;
        w_up[j] *= 3.0;
        const auto r3 = s.smooth(y, w_up);
        CHECK(std::abs(r3.theta[j] - y[j]) <= std::abs(r.theta[j] - y[j]) + 1e-6);
    }
}

TEST_CASE("auto lambda picks a grid value and stays finite") {
    const auto grid = grid_0_to(100, 5);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.1);
    Eigen::VectorXd y(21), w = Eigen::VectorXd::Constant(21, 30.0);
    for (Eigen::Index j = 0; j < 21; ++j) y[j] = -8 + 0.07 * 5 * j + noise(rng);
    SmoothingConfig cfg;
    cfg.lambda.reset();
    const auto r = smooth_curve(grid, y, w, cfg);
    const auto g = SmoothingConfig::default_lambda_grid();
    CHECK(std::find(g.begin(), g.end(), r.lambda) != g.end());
    CHECK(r.theta.allFinite());
}

TEST_CASE("missing cells are imputed") {
    const auto grid = grid_0_to(100, 5);
    Eigen::VectorXd y(21), w = Eigen::VectorXd::Ones(21);
    for (Eigen::Index j = 0; j < 21; ++j) y[j] = -9.0 + 0.08 * 5 * j;
    y[4] = std::numeric_limits<double>::quiet_NaN();
    w[7] = 0.0;
    y[7] = 50.0;
    const auto r = smooth_curve(grid, y, w, SmoothingConfig{});
    CHECK(r.theta.allFinite());
    CHECK(std::abs(r.theta[4] - (-9.0 + 1.6)) < 1e-3);
    CHECK(std::abs(r.theta[7] - (-9.0 + 2.8)) < 1e-3);
}

TEST_CASE("config validation") {
    const auto grid = grid_0_to(100, 5);
    SmoothingConfig cfg;
    cfg.monotone_from_age = 150;
    CHECK_THROWS_AS(Smoother(grid, cfg), Error);
    cfg = {};
    cfg.lambda.reset();
    cfg.lambda_grid.clear();
    CHECK_THROWS_AS(Smoother(grid, cfg), Error);
}

TEST_CASE("smooth_dataset covers every key, handles zero deaths and is deterministic") {
    auto ds = testing::toy_dataset(3, 8, 5);
    auto bottom = ds.bottom();
    bottom.begin()->second.deaths(1, 2) = 0.0;
    ds = GroupedDataset::build(ds.grid(), ds.scheme(), ds.years(), bottom);
    SmoothingConfig cfg;
    cfg.monotone_from_age = 50;
    const auto a = smooth_dataset(ds, cfg);
    const auto b = smooth_dataset(ds, cfg, 3);
    CHECK(a.series.size() == ds.all_keys().size());
    for (const auto& [k, s] : a.series) {
        CHECK(s.values.allFinite());
        CHECK(s.scale == Scale::LogRate);
        CHECK(s.values == b.series.at(k).values);
        for (Eigen::Index t = 0; t < s.values.rows(); ++t)
            for (Eigen::Index j = 5; j + 1 < s.values.cols(); ++j) CHECK(s.values(t, j + 1) >= s.values(t, j));
    }
}

}
