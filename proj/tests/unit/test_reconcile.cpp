#include "../support/oracles.hpp"
#include "fixtures.hpp"

#include "gfts/error.hpp"
#include "gfts/reconcile.hpp"

#include <doctest.h>

#include <random>

using namespace gfts;

namespace {

GroupedDataset sex_only(const std::vector<std::vector<double>>& exposure_by_series, std::size_t n_years = 1) {
    GroupingScheme s;
    s.attribute_names = {"sex"};
    s.bottom = {"sex"};
    s.levels = {{}, {"sex"}};
    std::map<SeriesKey, CellPanel> bottom;
    const char* names[] = {"F", "M", "X"};
    std::vector<int> years;
    for (std::size_t t = 0; t < n_years; ++t) years.push_back(2000 + static_cast<int>(t));
    for (std::size_t i = 0; i < exposure_by_series.size(); ++i) {
        CellPanel c{Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_years), 2, 1.0),
                    Eigen::MatrixXd(static_cast<Eigen::Index>(n_years), 2)};
        for (std::size_t t = 0; t < n_years; ++t) {
            c.exposure(static_cast<Eigen::Index>(t), 0) = exposure_by_series[i][t];
            c.exposure(static_cast<Eigen::Index>(t), 1) = exposure_by_series[i][t];
        }
        bottom.emplace(SeriesKey{{"sex", names[i]}}, std::move(c));
    }
    return GroupedDataset::build(AgeGrid({0, 1}), s, years, std::move(bottom));
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = 0.001, double hi = 0.2) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
}

}  // namespace

TEST_SUITE("reconcile") {

TEST_CASE("summing matrix structure") {
    SUBCASE("equal exposures") {
        const auto ds = sex_only({{100}, {100}});
        const auto s = build_summing_matrix(ds, 0, 0);
        REQUIRE(s.rows() == 3);
        CHECK(s.entries(0, 0) == 0.5);
        CHECK(s.entries(0, 1) == 0.5);
        CHECK(s.entries.bottomRows(2).isIdentity());
    }
    SUBCASE("single bottom series") {
        const auto ds = sex_only({{42}});
        const auto s = build_summing_matrix(ds, 0, 1);
        CHECK(s.rows() == 2);
        CHECK(s.cols() == 1);
        CHECK(s.entries(0, 0) == 1.0);
        CHECK(s.entries(1, 0) == 1.0);
    }
    SUBCASE("toy scheme invariants") {
        const auto ds = testing::toy_dataset(4, 5, 3);
        for (std::size_t z = 0; z < 5; ++z) {
            const auto s = build_summing_matrix(ds, 2, z);
            CHECK(s.rows() == 18);
            CHECK(s.cols() == 6);
            CHECK((s.entries.array() >= 0.0).all());
            CHECK((s.entries.array() <= 1.0).all());
            for (Eigen::Index r = 0; r < s.rows(); ++r) CHECK(std::abs(s.entries.row(r).sum() - 1.0) <= 1e-10);
            for (Eigen::Index c = 0; c < s.cols(); ++c) {
                const auto r = s.bottom_rows[static_cast<std::size_t>(c)];
                CHECK(s.row_keys[static_cast<std::size_t>(r)] == s.col_keys[static_cast<std::size_t>(c)]);
                CHECK(s.entries.row(r).sum() == 1.0);
                CHECK(s.entries(r, c) == 1.0);
            }
            // S applied to bottom rates reproduces every derived rate
            Eigen::VectorXd b(6), all(18);
            for (Eigen::Index c = 0; c < 6; ++c)
                b[c] = ds.series(s.col_keys[static_cast<std::size_t>(c)]).rates.values(2, static_cast<Eigen::Index>(z));
            for (Eigen::Index r = 0; r < 18; ++r)
                all[r] = ds.series(s.row_keys[static_cast<std::size_t>(r)]).rates.values(2, static_cast<Eigen::Index>(z));
            CHECK((s.entries * b - all).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("forecast summing matrices") {
    SUBCASE("constant ratios stay constant") {
        const auto ds = sex_only({std::vector<double>(12, 300.0), std::vector<double>(12, 100.0)}, 12);
        const auto f = forecast_summing_matrices(ds, 3);
        for (const auto& per_age : f)
            for (const auto& s : per_age) {
                CHECK(s.entries(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
                CHECK(s.entries(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
            }
    }
    SUBCASE("drifting ratios still sum to one") {
        std::vector<double> a, b;
        for (int t = 0; t < 15; ++t) {
            const double r = 0.4 + 0.2 * t / 14.0;
            a.push_back(1000 * r);
            b.push_back(1000 * (1 - r));
        }
        const auto ds = sex_only({a, b}, 15);
        const auto f = forecast_summing_matrices(ds, 5);
        for (const auto& per_age : f)
            for (const auto& s : per_age) CHECK(std::abs(s.entries.row(0).sum() - 1.0) <= 1e-12);
        CHECK(f[0][0].entries(0, 0) > 0.6);
    }
    SUBCASE("stochastic toy rows sum to one for every horizon") {
        const auto ds = testing::toy_dataset(14, 4, 21);
        const auto f = forecast_summing_matrices(ds, 10, 2);
        REQUIRE(f.size() == 10);
        for (const auto& per_age : f) {
            REQUIRE(per_age.size() == 4);
            for (const auto& s : per_age) {
                CHECK((s.entries.array() >= 0.0).all());
                for (Eigen::Index r = 0; r < s.rows(); ++r) CHECK(std::abs(s.entries.row(r).sum() - 1.0) <= 1e-12);
                for (std::size_t c = 0; c < s.bottom_rows.size(); ++c)
                    CHECK(s.entries.row(s.bottom_rows[c]).sum() == 1.0);
            }
        }
        const auto again = forecast_summing_matrices(ds, 10, 1);
        CHECK(again[9][3].entries == f[9][3].entries);
    }
}

TEST_CASE("bottom-up") {
    const auto ds = sex_only({{100}, {100}});
    const auto s = build_summing_matrix(ds, 0, 0);
    Eigen::Vector2d b(0.01, 0.03);
    const auto r = bottom_up(s, b);
    CHECK(r[0] == doctest::Approx(0.02));
    CHECK(r[1] == 0.01);
    CHECK(r[2] == 0.03);
    CHECK(bottom_up(s, Eigen::Vector2d::Zero()).isZero());
    CHECK_THROWS_AS((void)bottom_up(s, Eigen::Vector3d::Zero()), Error);
    const std::vector<SeriesKey> wrong{SeriesKey{{"sex", "M"}}, SeriesKey{{"sex", "F"}}};
    CHECK_THROWS_AS((void)bottom_up(s, wrong, b), Error);

    std::mt19937_64 rng(8);
    const auto toy = testing::toy_dataset(3, 3, 2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto st = build_summing_matrix(toy, static_cast<std::size_t>(trial % 3), static_cast<std::size_t>(trial % 3));
        const Eigen::VectorXd base = random_vector(rng, st.cols());
        const auto got = bottom_up(st, st.col_keys, base);
        const auto expected = oracle::matvec(rows_of(st.entries), std::vector<double>(base.data(), base.data() + base.size()));
        for (Eigen::Index i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-14));
        CHECK(aggregation_residual(st, got) <= 1e-15);
    }
}

TEST_CASE("optimal combination") {
    SUBCASE("one bottom series hand example") {
        const auto ds = sex_only({{42}});
        const auto s = build_summing_matrix(ds, 0, 0);
        const auto r = optimal_combination(s, Eigen::Vector2d(0.03, 0.01), Weighting::OLS);
        CHECK(r[0] == doctest::Approx(0.02));
        CHECK(r[1] == doctest::Approx(0.02));
    }
    SUBCASE("errors") {
        const auto ds = sex_only({{1}, {3}});
        const auto s = build_summing_matrix(ds, 0, 0);
        CHECK_THROWS_AS((void)optimal_combination(s, Eigen::Vector3d(1, 2, 3), Weighting::WLS, Eigen::Vector3d(1, 0, 1)), Error);
        CHECK_THROWS_AS((void)optimal_combination(s, Eigen::Vector2d(1, 2), Weighting::OLS), Error);
        SummingMatrix bad = s;
        bad.entries.col(1) = bad.entries.col(0);
        CHECK_THROWS_AS(Reconciler(bad, Weighting::OLS), Error);
    }
    SUBCASE("random instances against the normal equations") {
        std::mt19937_64 rng(12);
        const auto toy = testing::toy_dataset(3, 4, 9);
        for (int trial = 0; trial < 30; ++trial) {
            const auto s = build_summing_matrix(toy, static_cast<std::size_t>(trial % 3), static_cast<std::size_t>(trial % 4));
            const Eigen::VectorXd base = random_vector(rng, s.rows());
            const Eigen::VectorXd var = random_vector(rng, s.rows(), 0.1, 5.0);
            const auto got = optimal_combination(s, s.row_keys, base, Weighting::WLS, var);

            // S' W^-1 S beta = S' W^-1 y, solved by elimination
            const auto S = rows_of(s.entries);
            const std::size_t R = S.size(), C = S[0].size();
            std::vector<std::vector<double>> A(C, std::vector<double>(C, 0.0));
            std::vector<double> rhs(C, 0.0);
            for (std::size_t i = 0; i < C; ++i) {
                for (std::size_t j = 0; j < C; ++j)
                    for (std::size_t r = 0; r < R; ++r) A[i][j] += S[r][i] * S[r][j] / var[static_cast<Eigen::Index>(r)];
                for (std::size_t r = 0; r < R; ++r) rhs[i] += S[r][i] * base[static_cast<Eigen::Index>(r)] / var[static_cast<Eigen::Index>(r)];
            }
            const auto beta = oracle::gauss_solve(A, rhs);
            const auto expected = oracle::matvec(S, beta);
            for (std::size_t r = 0; r < R; ++r) CHECK(std::abs(got[static_cast<Eigen::Index>(r)] - expected[r]) < 1e-12);

            CHECK(aggregation_residual(s, got) <= 1e-12);
            const auto twice = optimal_combination(s, got, Weighting::WLS, var);
            CHECK((twice - got).cwiseAbs().maxCoeff() <= 1e-12);

            const Eigen::VectorXd b = random_vector(rng, s.cols());
            const Eigen::VectorXd consistent = s.entries * b;
            CHECK((optimal_combination(s, consistent, Weighting::OLS) - consistent).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((optimal_combination(s, consistent, Weighting::WLS, var) - bottom_up(s, b)).cwiseAbs().maxCoeff() <= 1e-12);

            const Eigen::VectorXd x = random_vector(rng, s.rows(), -1, 1), y = random_vector(rng, s.rows(), -1, 1);
            const Reconciler ols(s, Weighting::OLS);
            const Eigen::VectorXd px = ols.apply(x), py = ols.apply(y);
            CHECK(std::abs(px.dot(y) - x.dot(py)) < 1e-12);
        }
    }
}

}
