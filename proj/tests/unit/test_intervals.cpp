#include "fixtures.hpp"

#include "gfts/error.hpp"
#include "gfts/intervals.hpp"
#include "gfts/reconcile.hpp"

#include <doctest.h>

#include <random>

using namespace gfts;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

}  // namespace

TEST_SUITE("intervals") {

TEST_CASE("type 7 quantiles") {
    CHECK(quantile_type7({4, 1, 3, 2}, 0.025) == doctest::Approx(1.075));
    CHECK(quantile_type7({4, 1, 3, 2}, 0.975) == doctest::Approx(3.925));
    CHECK(quantile_type7({5}, 0.3) == 5.0);
    CHECK(quantile_type7({1, 2}, 0.5) == 1.5);
}

TEST_CASE("bootstrap bounds") {
    SUBCASE("zero errors") {
        const auto b = bootstrap_bounds(Eigen::MatrixXd::Zero(8, 3), 200, 1);
        CHECK(b.lower.isZero());
        CHECK(b.upper.isZero());
    }
    SUBCASE("symmetric unit errors") {
        Eigen::MatrixXd e(10, 4);
        for (Eigen::Index i = 0; i < 10; ++i) e.row(i).setConstant(i % 2 ? 1.0 : -1.0);
        const auto b = bootstrap_bounds(e, 500, 3);
        CHECK((b.lower.array() >= -1.0).all());
        CHECK((b.upper.array() <= 1.0).all());
        CHECK((b.lower.array() < 0.0).all());
        CHECK((b.upper.array() > 0.0).all());
    }
    SUBCASE("normal errors approximate normal quantiles") {
        // A 2.5% sample quantile from 50 draws has a standard error near 0.38, so a
        // per-age band of 0.35 only holds on average over ages.
        const Eigen::Index p = 40;
        const auto e = normal_matrix(50, p, 77);
        const auto b = bootstrap_bounds(e, 1000, 5);
        CHECK(std::abs(b.lower.mean() + 1.96) <= 0.35);
        CHECK(std::abs(b.upper.mean() - 1.96) <= 0.35);
    }
    SUBCASE("determinism and preconditions") {
        const auto e = normal_matrix(20, 3, 1);
        const auto a = bootstrap_bounds(e, 300, 9);
        const auto b = bootstrap_bounds(e, 300, 9);
        CHECK(a.lower == b.lower);
        CHECK(a.upper == b.upper);
        CHECK_THROWS_AS((void)bootstrap_bounds(e.topRows(4), 300, 9), Error);
        CHECK_THROWS_AS((void)bootstrap_bounds(e, 99, 9), Error);
    }
    SUBCASE("replicate rows are shared across series of different lengths") {
        for (std::size_t b = 0; b < 50; ++b) {
            const auto r30 = replicate_row(4, b, 30);
            const auto r60 = replicate_row(4, b, 60);
            CHECK(r30 < 30);
            CHECK((r60 == 2 * r30 || r60 == 2 * r30 + 1));
        }
    }
}

TEST_CASE("tuning") {
    SUBCASE("zero errors and bounds") {
        const Eigen::MatrixXd e = Eigen::MatrixXd::Zero(6, 3);
        const BootstrapBounds b{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
        CHECK(tune_uniform(e, b, 0.2) == 1e-4);
        CHECK(tune_pointwise(e, b, 0.2) == 1e-4);
    }
    SUBCASE("single row equal to the upper bound") {
        const BootstrapBounds b{Eigen::Vector3d(-1, -2, -1), Eigen::Vector3d(0.5, 1.0, 2.0)};
        const Eigen::MatrixXd e = b.upper.transpose();
        const double phi = tune_uniform(e, b, 0.2);
        CHECK(phi >= 1.0);
        CHECK(phi <= 1.0 + 1e-4);
        CHECK(uniform_coverage(e, b, 1.0) == 1.0);
        const double pi = tune_pointwise(e, b, 0.2);
        CHECK(pi >= 1.0);
        CHECK(pi <= 1.0 + 1e-4);
    }
    SUBCASE("synthetic normal errors") {
        const auto e = normal_matrix(200, 6, 31);
        const auto b = bootstrap_bounds(e, 1000, 2);
        const double phi = tune_uniform(e, b, 0.2);
        const double cu = uniform_coverage(e, b, phi);
        CHECK(cu >= 0.8);
        CHECK(cu <= 0.85);
        const double pi = tune_pointwise(e, b, 0.2);
        const double cp = pointwise_coverage(e, b, pi);
        CHECK(cp >= 0.8);
        CHECK(cp <= 0.85);
        // monotone coverage
        double prev = 0.0;
        for (double x = 0.05; x < 3.0; x += 0.05) {
            const double c = uniform_coverage(e, b, x);
            CHECK(c >= prev);
            prev = c;
        }
    }
    SUBCASE("unattainable") {
        Eigen::MatrixXd e = Eigen::MatrixXd::Constant(6, 2, 0.5);
        const BootstrapBounds b{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
        try {
            (void)tune_uniform(e, b, 0.2);
            FAIL("expected Unattainable");
        } catch (const Error& err) {
            CHECK(err.kind() == ErrorKind::Unattainable);
        }
    }
}

TEST_CASE("forecast intervals") {
    const std::vector<double> ages{0, 20, 40, 60, 80, 100};
    SUBCASE("degenerate model gives a zero-width band") {
        FunctionalSeries s{AgeGrid(ages), {}, Eigen::MatrixXd(12, 6), Scale::LogRate};
        for (int t = 0; t < 12; ++t) s.years.push_back(2000 + t);
        for (Eigen::Index t = 0; t < 12; ++t) s.values.row(t) = Eigen::RowVectorXd::LinSpaced(6, -8, -1);
        const auto m = fit_fpca(s);
        const auto f = forecast_intervals(m, naive_factory(), 2, 0.2, IntervalKind::Uniform, 200, 1);
        // in-sample errors are pure rounding here
        CHECK((f.lower - f.point).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((f.upper - f.point).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("end to end determinism") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> z;
        FunctionalSeries s{AgeGrid(ages), {}, Eigen::MatrixXd(40, 6), Scale::LogRate};
        for (int t = 0; t < 40; ++t) {
            s.years.push_back(1900 + t);
            const double a = z(rng), b = 0.3 * z(rng);
            for (int j = 0; j < 6; ++j) s.values(t, j) = -8 + 0.07 * ages[j] + a * 0.1 + b * 0.01 * ages[j];
        }
        const auto m = fit_fpca(s);
        const auto f = forecast_intervals(m, naive_factory(), 2, 0.2, IntervalKind::Uniform, 300, 3);
        CHECK(((f.upper - f.lower).array() >= 0.0).all());
        const auto again = forecast_intervals(m, naive_factory(), 2, 0.2, IntervalKind::Uniform, 300, 3);
        CHECK(again.lower == f.lower);
        CHECK(again.upper == f.upper);
    }
}

TEST_CASE("symmetric errors give a near-symmetric band") {
    // each error row appears together with its negation
    const auto half = normal_matrix(30, 8, 12, 0.05);
    Eigen::MatrixXd e(60, 8);
    e << half, -half;
    const Eigen::VectorXd point = Eigen::VectorXd::LinSpaced(8, -9, -2);
    const auto bounds = bootstrap_bounds(e, 1000, 8);
    for (auto kind : {IntervalKind::Uniform, IntervalKind::Pointwise}) {
        const auto f = make_interval(point, e, bounds, 1, 0.2, kind);
        const Eigen::VectorXd width = f.upper - f.lower;
        const Eigen::VectorXd asym = ((f.upper - f.point) - (f.point - f.lower)).cwiseAbs();
        for (Eigen::Index j = 0; j < 8; ++j) CHECK(asym[j] <= 0.1 * width[j]);
    }
}

TEST_CASE("replicate reconciliation") {
    const auto ds = testing::toy_dataset(3, 3, 4);
    std::vector<SummingMatrix> s;
    for (std::size_t z = 0; z < 3; ++z) s.push_back(build_summing_matrix(ds, 2, z));
    const auto R = static_cast<std::size_t>(s[0].rows());
    const auto C = static_cast<std::size_t>(s[0].cols());
    const int B = 200;
    const ReplicateMap bottom_up_map = [&](std::size_t z, const Eigen::MatrixXd& rates) -> Eigen::MatrixXd {
        return s[z].entries * rates;
    };

    std::vector<Eigen::MatrixXd> bottom_reps;
    for (std::size_t c = 0; c < C; ++c) {
        const Eigen::Vector3d point(-6.0 + 0.1 * c, -4.0, -2.0);
        bottom_reps.push_back(bootstrap_replicates(point, normal_matrix(12, 3, 100 + c, 0.2), B, 42));
    }
    const auto rec = reconcile_replicates(bottom_reps, bottom_up_map, R);

    SUBCASE("every replicate aggregates exactly") {
        for (std::size_t z = 0; z < 3; ++z)
            for (int b = 0; b < B; ++b) {
                Eigen::VectorXd all(static_cast<Eigen::Index>(R));
                for (std::size_t r = 0; r < R; ++r) all[static_cast<Eigen::Index>(r)] = std::exp(rec[r](b, static_cast<Eigen::Index>(z)));
                CHECK(aggregation_residual(s[z], all) <= 1e-10);
            }
    }
    SUBCASE("consistent replicates are unchanged") {
        std::vector<Eigen::MatrixXd> rebottom;
        for (std::size_t c = 0; c < C; ++c) rebottom.push_back(rec[static_cast<std::size_t>(s[0].bottom_rows[c])]);
        const auto again = reconcile_replicates(rebottom, bottom_up_map, R);
        for (std::size_t r = 0; r < R; ++r) CHECK((again[r] - rec[r]).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("aggregate width is at most the weighted sum of bottom widths") {
        for (std::size_t z = 0; z < 3; ++z) {
            const auto zi = static_cast<Eigen::Index>(z);
            auto width = [&](const Eigen::MatrixXd& reps) {
                std::vector<double> v;
                for (int b = 0; b < B; ++b) v.push_back(std::exp(reps(b, zi)));
                return quantile_type7(v, 0.975) - quantile_type7(v, 0.025);
            };
            for (std::size_t r = 0; r < R; ++r) {
                double bound = 0.0;
                for (std::size_t c = 0; c < C; ++c) bound += s[z].entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * width(bottom_reps[c]);
                CHECK(width(rec[r]) <= bound + 1e-12);
            }
        }
    }
    SUBCASE("intervals from reconciled replicates") {
        const Eigen::Vector3d point = rec[0].colwise().mean().transpose();
        const auto f = interval_from_replicates(point, rec[0], normal_matrix(15, 3, 9, 0.1), 1, 0.2, IntervalKind::Pointwise);
        CHECK((f.lower.array() <= f.point.array()).all());
        CHECK((f.upper.array() >= f.point.array()).all());
    }
}

}
