#include "gfts/reconcile.hpp"

#include "gfts/error.hpp"
#include "gfts/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace gfts {

namespace {

// Row/column layout shared by every age and year.
struct Layout {
    std::vector<SeriesKey> rows;
    std::vector<SeriesKey> cols;
    std::vector<std::vector<std::size_t>> members;  // column indices per row
    std::vector<bool> is_bottom;
    std::vector<Eigen::Index> bottom_rows;
};

Layout layout_of(const GroupedDataset& ds) {
    Layout l;
    l.rows = ds.all_keys();
    l.cols = ds.bottom_keys();
    const std::size_t bottom_level = ds.scheme().levels.size() - 1;
    for (std::size_t r = 0; r < l.rows.size(); ++r) {
        std::vector<std::size_t> idx;
        for (const auto& m : ds.members_of(l.rows[r]))
            idx.push_back(static_cast<std::size_t>(std::lower_bound(l.cols.begin(), l.cols.end(), m) - l.cols.begin()));
        l.members.push_back(std::move(idx));
        l.is_bottom.push_back(ds.key_levels()[r] == bottom_level);
    }
    l.bottom_rows.assign(l.cols.size(), 0);
    for (std::size_t r = 0; r < l.rows.size(); ++r)
        if (l.is_bottom[r]) l.bottom_rows[l.members[r][0]] = static_cast<Eigen::Index>(r);
    return l;
}

void check_keys(std::span<const SeriesKey> given, const std::vector<SeriesKey>& expected, const char* what) {
    if (given.size() != expected.size() || !std::equal(given.begin(), given.end(), expected.begin()))
        fail(ErrorKind::KeyMismatch, std::string("base forecasts do not cover the ") + what + " in canonical order");
}

}  // namespace

SummingMatrix build_summing_matrix(const GroupedDataset& dataset, std::size_t t, std::size_t z) {
    if (t >= dataset.n_years() || z >= dataset.grid().size())
        fail(ErrorKind::InvalidArgument, "year or age index out of range");
    const auto layout = layout_of(dataset);
    SummingMatrix s;
    s.row_keys = layout.rows;
    s.col_keys = layout.cols;
    s.bottom_rows = layout.bottom_rows;
    s.age_index = z;
    s.year_index = t;
    s.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.rows.size()),
                                      static_cast<Eigen::Index>(layout.cols.size()));
    const auto ti = static_cast<Eigen::Index>(t);
    const auto zi = static_cast<Eigen::Index>(z);
    for (std::size_t r = 0; r < layout.rows.size(); ++r) {
        const double eg = dataset.series(layout.rows[r]).cells.exposure(ti, zi);
        if (!(eg > 0.0)) fail(ErrorKind::ZeroExposure, "zero exposure for " + layout.rows[r].label());
        for (std::size_t c : layout.members[r])
            s.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                layout.is_bottom[r] ? 1.0 : dataset.bottom().at(layout.cols[c]).exposure(ti, zi) / eg;
    }
    return s;
}

std::vector<std::vector<SummingMatrix>> forecast_summing_matrices(const GroupedDataset& dataset, int h_max,
                                                                  unsigned threads, const AutoArimaOptions& options) {
    if (h_max < 1) fail(ErrorKind::InvalidArgument, "h_max must be >= 1");
    const std::size_t n = dataset.n_years();
    if (n < 10) fail(ErrorKind::SeriesTooShort, "ratio forecasting needs at least 10 years");
    const auto layout = layout_of(dataset);
    const std::size_t p = dataset.grid().size();
    const auto R = static_cast<Eigen::Index>(layout.rows.size());
    const auto C = static_cast<Eigen::Index>(layout.cols.size());

    // one task per age; results land in per-age slots
    std::vector<std::vector<Eigen::MatrixXd>> per_age(p);  // [z][h]
    parallel_for(p, threads, [&](std::size_t z) {
        const auto zi = static_cast<Eigen::Index>(z);
        std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(h_max), Eigen::MatrixXd::Zero(R, C));
        std::vector<double> ratios(n);
        for (std::size_t r = 0; r < layout.rows.size(); ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            if (layout.is_bottom[r]) {
                for (auto& m : out) m(ri, static_cast<Eigen::Index>(layout.members[r][0])) = 1.0;
                continue;
            }
            const auto& eg = dataset.series(layout.rows[r]).cells.exposure;
            for (std::size_t c : layout.members[r]) {
                const auto& eb = dataset.bottom().at(layout.cols[c]).exposure;
                for (std::size_t t = 0; t < n; ++t) {
                    const auto ti = static_cast<Eigen::Index>(t);
                    ratios[t] = eb(ti, zi) / eg(ti, zi);
                }
                ScoreForecast f;
                try {
                    f = forecast(auto_arima(ratios, options), ratios, h_max);
                } catch (const Error& e) {
                    throw e.with_context("ratio " + layout.cols[c].label() + " in " + layout.rows[r].label() +
                                         " at age index " + std::to_string(z));
                }
                for (int h = 0; h < h_max; ++h)
                    out[static_cast<std::size_t>(h)](ri, static_cast<Eigen::Index>(c)) =
                        std::clamp(f.mean[static_cast<std::size_t>(h)], 0.0, 1.0);
            }
            for (auto& m : out) {
                const double sum = m.row(ri).sum();
                if (sum > 0.0) {
                    m.row(ri) /= sum;
                } else {
                    for (std::size_t c : layout.members[r]) {
                        const auto ci = static_cast<Eigen::Index>(c);
                        const auto tl = static_cast<Eigen::Index>(n - 1);
                        m(ri, ci) = dataset.bottom().at(layout.cols[c]).exposure(tl, zi) / eg(tl, zi);
                    }
                }
            }
        }
        per_age[z] = std::move(out);
    });

    std::vector<std::vector<SummingMatrix>> result(static_cast<std::size_t>(h_max));
    for (int h = 0; h < h_max; ++h)
        for (std::size_t z = 0; z < p; ++z) {
            SummingMatrix s;
            s.row_keys = layout.rows;
            s.col_keys = layout.cols;
            s.bottom_rows = layout.bottom_rows;
            s.age_index = z;
            s.year_index = n + static_cast<std::size_t>(h);
            s.entries = std::move(per_age[z][static_cast<std::size_t>(h)]);
            result[static_cast<std::size_t>(h)].push_back(std::move(s));
        }
    return result;
}

std::vector<SummingMatrix> forecast_summing_matrix(const GroupedDataset& dataset, int h, unsigned threads) {
    auto all = forecast_summing_matrices(dataset, h, threads);
    return std::move(all.back());
}

Eigen::VectorXd bottom_up(const SummingMatrix& s, const Eigen::VectorXd& base) {
    if (base.size() != s.cols()) fail(ErrorKind::KeyMismatch, "bottom-up needs exactly the bottom series");
    Eigen::VectorXd out = s.entries * base;
    // bottom rows are identity rows; copy to keep them bit-exact
    for (Eigen::Index c = 0; c < s.cols(); ++c) out[s.bottom_rows[static_cast<std::size_t>(c)]] = base[c];
    return out;
}

Eigen::VectorXd bottom_up(const SummingMatrix& s, std::span<const SeriesKey> keys, const Eigen::VectorXd& base) {
    check_keys(keys, s.col_keys, "bottom series");
    return bottom_up(s, base);
}

Reconciler::Reconciler(const SummingMatrix& s, Weighting weighting, const Eigen::VectorXd& variances)
    : s_(s.entries) {
    const auto R = s_.rows();
    root_inv_w_ = Eigen::VectorXd::Ones(R);
    if (weighting == Weighting::WLS) {
        if (variances.size() != R) fail(ErrorKind::KeyMismatch, "one variance per series is required for WLS");
        for (Eigen::Index i = 0; i < R; ++i) {
            if (!(variances[i] > 0.0) || !std::isfinite(variances[i]))
                fail(ErrorKind::NonPositiveVariance, "WLS variance for " + s.row_keys[static_cast<std::size_t>(i)].label() +
                                                          " is not positive");
            root_inv_w_[i] = 1.0 / std::sqrt(variances[i]);
        }
    }
    qr_.compute(root_inv_w_.asDiagonal() * s_);
    // rank check on the triangular factor
    const Eigen::MatrixXd Rm = qr_.matrixQR().topRows(s_.cols()).triangularView<Eigen::Upper>();
    const double top = Rm.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < s_.cols(); ++i)
        if (!(std::abs(Rm(i, i)) > 1e-12 * top)) fail(ErrorKind::SingularSystem, "summing matrix is rank deficient");
}

Eigen::MatrixXd Reconciler::coefficients(const Eigen::MatrixXd& base) const {
    if (base.rows() != s_.rows()) fail(ErrorKind::KeyMismatch, "optimal combination needs every series");
    return qr_.solve(root_inv_w_.asDiagonal() * base);
}

Eigen::MatrixXd Reconciler::apply(const Eigen::MatrixXd& base) const { return s_ * coefficients(base); }

Eigen::VectorXd optimal_combination(const SummingMatrix& s, const Eigen::VectorXd& base, Weighting weighting,
                                    const Eigen::VectorXd& variances) {
    return Reconciler(s, weighting, variances).apply(base);
}

Eigen::VectorXd optimal_combination(const SummingMatrix& s, std::span<const SeriesKey> keys,
                                    const Eigen::VectorXd& base, Weighting weighting,
                                    const Eigen::VectorXd& variances) {
    check_keys(keys, s.row_keys, "full set of series");
    return optimal_combination(s, base, weighting, variances);
}

double aggregation_residual(const SummingMatrix& s, const Eigen::VectorXd& values) {
    if (values.size() != s.rows()) fail(ErrorKind::KeyMismatch, "one value per series is required");
    // bottom values sit in the identity rows
    Eigen::VectorXd b(s.cols());
    for (Eigen::Index c = 0; c < s.cols(); ++c) b[c] = values[s.bottom_rows[static_cast<std::size_t>(c)]];
    return (s.entries * b - values).cwiseAbs().maxCoeff();
}

}  // namespace gfts
