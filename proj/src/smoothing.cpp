#include "gfts/smoothing.hpp"

#include "gfts/error.hpp"
#include "gfts/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gfts {

std::vector<double> SmoothingConfig::default_lambda_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 12; ++i) g.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    return g;
}

void SmoothingConfig::validate(const AgeGrid& grid) const {
    if (monotone_from_age < grid.ages().front() || monotone_from_age > grid.ages().back())
        fail(ErrorKind::InvalidArgument, "monotone_from_age lies outside the age grid");
    if (lambda && !(*lambda > 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be positive");
    if (!lambda) {
        if (lambda_grid.empty()) fail(ErrorKind::InvalidArgument, "lambda_grid is empty");
        for (double l : lambda_grid)
            if (!(l > 0.0)) fail(ErrorKind::InvalidArgument, "lambda_grid entries must be positive");
    }
    if (!(huber_epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "huber_epsilon must be positive");
    if (max_iterations < 1) fail(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
    if (!(tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "tolerance must be non-negative");
}

Eigen::MatrixXd poisson_weights(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposure) {
    if (deaths.rows() != exposure.rows() || deaths.cols() != exposure.cols())
        fail(ErrorKind::ShapeMismatch, "deaths and exposure differ in shape");
    Eigen::MatrixXd w(deaths.rows(), deaths.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!(exposure.data()[i] > 0.0)) fail(ErrorKind::NonPositiveExposure, "exposure must be positive");
        const double d = deaths.data()[i];
        w.data()[i] = d > 0.0 ? d : 0.5;
    }
    return w;
}

Eigen::MatrixXd raw_log_rates(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposure) {
    Eigen::MatrixXd y(deaths.rows(), deaths.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = deaths.data()[i];
        const double e = exposure.data()[i];
        y.data()[i] = std::log((d > 0.0 ? d : d + 0.5) / e);
    }
    return y;
}

Eigen::MatrixXd bspline_basis(const std::vector<double>& x, int interior_knots) {
    constexpr int degree = 3;
    const double a = x.front();
    const double b = x.back();
    std::vector<double> t;
    for (int i = 0; i <= degree; ++i) t.push_back(a);
    for (int i = 1; i <= interior_knots; ++i) t.push_back(a + (b - a) * i / (interior_knots + 1));
    for (int i = 0; i <= degree; ++i) t.push_back(b);
    const int nb = static_cast<int>(t.size()) - degree - 1;

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), nb);
    std::vector<double> N(t.size());
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double z = x[r];
        // span index s with t[s] <= z < t[s+1]; the right end belongs to the last span
        int s = degree;
        while (s < nb - 1 && z >= t[static_cast<std::size_t>(s + 1)]) ++s;
        std::fill(N.begin(), N.end(), 0.0);
        N[static_cast<std::size_t>(s)] = 1.0;
        for (int k = 1; k <= degree; ++k) {
            for (int i = s - k; i <= s; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                double v = 0.0;
                const double left = t[ui + static_cast<std::size_t>(k)] - t[ui];
                if (left > 0.0) v += (z - t[ui]) / left * N[ui];
                const double right = t[ui + static_cast<std::size_t>(k) + 1] - t[ui + 1];
                if (right > 0.0) v += (t[ui + static_cast<std::size_t>(k) + 1] - z) / right * N[ui + 1];
                N[ui] = v;
            }
        }
        for (int i = s - degree; i <= s; ++i) B(static_cast<Eigen::Index>(r), i) = N[static_cast<std::size_t>(i)];
    }
    return B;
}

void pava_non_decreasing(std::span<double> values) {
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    for (double v : values) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            const Block last = blocks.back();
            blocks.pop_back();
            blocks.back().sum += last.sum;
            blocks.back().count += last.count;
        }
    }
    std::size_t i = 0;
    for (const auto& blk : blocks) {
        const double m = blk.mean();
        for (std::size_t k = 0; k < blk.count; ++k) values[i++] = m;
    }
}

Smoother::Smoother(const AgeGrid& grid, SmoothingConfig config) : grid_(grid), config_(std::move(config)) {
    config_.validate(grid_);
    const auto& z = grid_.ages();
    const auto p = static_cast<Eigen::Index>(z.size());
    const int knots = config_.basis_knots > 0 ? config_.basis_knots
                                              : std::min(static_cast<int>(z.size()) / 2, 30);
    if (knots + 4 >= p)
        B_ = Eigen::MatrixXd::Identity(p, p);
    else
        B_ = bspline_basis(z, knots);

    D_ = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(p - 2, 0), p);
    for (Eigen::Index j = 1; j + 1 < p; ++j) {
        const double h0 = z[static_cast<std::size_t>(j)] - z[static_cast<std::size_t>(j - 1)];
        const double h1 = z[static_cast<std::size_t>(j + 1)] - z[static_cast<std::size_t>(j)];
        D_(j - 1, j - 1) = 1.0 / h0;
        D_(j - 1, j) = -1.0 / h0 - 1.0 / h1;
        D_(j - 1, j + 1) = 1.0 / h1;
    }
    DB_ = D_ * B_;
    monotone_start_ = static_cast<std::size_t>(
        std::lower_bound(z.begin(), z.end(), config_.monotone_from_age) - z.begin());
}

double Smoother::objective(const Eigen::VectorXd& y, const Eigen::VectorXd& w, const Eigen::VectorXd& theta,
                           double lambda) const {
    const double eps2 = config_.huber_epsilon * config_.huber_epsilon;
    double loss = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        if (!(w[j] > 0.0) || !std::isfinite(y[j])) continue;
        const double r = y[j] - theta[j];
        loss += w[j] * std::sqrt(r * r + eps2);
    }
    double pen = 0.0;
    const Eigen::VectorXd d = D_ * theta;
    for (Eigen::Index j = 0; j < d.size(); ++j) pen += std::sqrt(d[j] * d[j] + eps2);
    return loss + lambda * pen;
}

SmoothResult Smoother::fit(const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda) const {
    const auto p = y.size();
    const auto nb = B_.cols();
    const double eps2 = config_.huber_epsilon * config_.huber_epsilon;

    Eigen::VectorXd w0(p), y0(p);
    bool any = false;
    for (Eigen::Index j = 0; j < p; ++j) {
        const bool ok = w[j] > 0.0 && std::isfinite(w[j]) && std::isfinite(y[j]);
        w0[j] = ok ? w[j] : 0.0;
        y0[j] = ok ? y[j] : 0.0;
        any = any || ok;
    }
    if (!any) fail(ErrorKind::InvalidArgument, "curve has no observed cells");

    auto solve = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        Eigen::MatrixXd A = B_.transpose() * u.asDiagonal() * B_;
        A.noalias() += DB_.transpose() * v.asDiagonal() * DB_;
        const double ridge = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);
        A.diagonal().array() += ridge;
        const Eigen::VectorXd rhs = B_.transpose() * (u.array() * y0.array()).matrix();
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success) return Eigen::VectorXd(B_ * llt.solve(rhs));
        return Eigen::VectorXd(B_ * A.ldlt().solve(rhs));
    };

    // start from the weighted quadratic fit
    Eigen::VectorXd theta = solve(w0, Eigen::VectorXd::Constant(DB_.rows(), lambda));
    (void)nb;

    SmoothResult res;
    res.lambda = lambda;
    double f = objective(y0, w0, theta, lambda);
    res.objective_trace.push_back(f);
    Eigen::VectorXd u(p), v(DB_.rows());
    for (int it = 1; it <= config_.max_iterations; ++it) {
        const Eigen::VectorXd d = D_ * theta;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double r = y0[j] - theta[j];
            u[j] = w0[j] / std::sqrt(r * r + eps2);
        }
        for (Eigen::Index j = 0; j < d.size(); ++j) v[j] = lambda / std::sqrt(d[j] * d[j] + eps2);
        Eigen::VectorXd next = solve(u, v);
        const double f_next = objective(y0, w0, next, lambda);
        res.iterations = it;
        // the majorizer guarantees descent up to rounding; never accept an ascent
        if (f_next > f) {
            res.converged = (f_next - f) <= config_.tolerance * std::max(1.0, std::abs(f)) * 10.0;
            break;
        }
        res.objective_trace.push_back(f_next);
        const double change = (f - f_next) / std::max(std::abs(f), 1e-300);
        theta = std::move(next);
        f = f_next;
        if (change <= config_.tolerance) {
            res.converged = true;
            break;
        }
    }
    project_monotone(theta);
    res.theta = std::move(theta);
    return res;
}

void Smoother::project_monotone(Eigen::VectorXd& theta) const {
    const auto p = static_cast<std::size_t>(theta.size());
    if (monotone_start_ + 1 >= p) return;
    pava_non_decreasing(std::span<double>(theta.data() + monotone_start_, p - monotone_start_));
}

double Smoother::select_lambda(const Eigen::VectorXd& y, const Eigen::VectorXd& w) const {
    constexpr int folds = 5;
    double best = config_.lambda_grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : config_.lambda_grid) {
        double score = 0.0;
        for (int f = 0; f < folds; ++f) {
            Eigen::VectorXd wt = w;
            bool held = false;
            for (Eigen::Index j = f; j < w.size(); j += folds) {
                wt[j] = 0.0;
                held = true;
            }
            if (!held || !(wt.array() > 0.0).any()) continue;
            const auto r = fit(y, wt, lambda);
            for (Eigen::Index j = f; j < w.size(); j += folds)
                if (w[j] > 0.0 && std::isfinite(y[j])) score += w[j] * std::abs(y[j] - r.theta[j]);
        }
        if (score < best_score) {
            best_score = score;
            best = lambda;
        }
    }
    return best;
}

SmoothResult Smoother::smooth(const Eigen::VectorXd& y, const Eigen::VectorXd& w) const {
    if (y.size() != static_cast<Eigen::Index>(grid_.size()) || w.size() != y.size())
        fail(ErrorKind::ShapeMismatch, "curve length differs from the age grid");
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w[j] < 0.0 || std::isnan(w[j])) fail(ErrorKind::InvalidArgument, "weights must be non-negative");
    const double lambda = config_.lambda ? *config_.lambda : select_lambda(y, w);
    return fit(y, w, lambda);
}

SmoothResult smooth_curve(const AgeGrid& grid, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          const SmoothingConfig& config) {
    return Smoother(grid, config).smooth(y, w);
}

SmoothedDataset smooth_dataset(const GroupedDataset& dataset, const SmoothingConfig& config, unsigned threads) {
    const Smoother smoother(dataset.grid(), config);
    const auto& keys = dataset.all_keys();
    const std::size_t n = dataset.n_years();
    const auto p = static_cast<Eigen::Index>(dataset.grid().size());

    struct Slot {
        Eigen::MatrixXd values;
        std::vector<std::string> warnings;
    };
    std::vector<Slot> slots(keys.size());
    parallel_for(keys.size(), threads, [&](std::size_t i) {
        const auto& cells = dataset.series(keys[i]).cells;
        const Eigen::MatrixXd w = poisson_weights(cells.deaths, cells.exposure);
        const Eigen::MatrixXd y = raw_log_rates(cells.deaths, cells.exposure);
        Slot& slot = slots[i];
        slot.values.resize(static_cast<Eigen::Index>(n), p);
        for (std::size_t t = 0; t < n; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            try {
                const auto r = smoother.smooth(y.row(ti).transpose(), w.row(ti).transpose());
                slot.values.row(ti) = r.theta.transpose();
                if (!r.converged)
                    slot.warnings.push_back(keys[i].label() + " year " + std::to_string(dataset.years()[t]) +
                                            ": smoother hit the iteration cap");
            } catch (const Error& e) {
                throw e.with_context(keys[i].label() + " year " + std::to_string(dataset.years()[t]));
            }
        }
    });

    SmoothedDataset out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        FunctionalSeries s{dataset.grid(), dataset.years(), std::move(slots[i].values), Scale::LogRate};
        out.series.emplace(keys[i], std::move(s));
        for (auto& w : slots[i].warnings) out.warnings.push_back(std::move(w));
    }
    return out;
}

}  // namespace gfts
