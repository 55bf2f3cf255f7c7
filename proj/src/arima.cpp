#include "gfts/arima.hpp"

#include "bfgs.hpp"
#include "gfts/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

namespace gfts {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sd_of(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

bool is_constant(std::span<const double> x) {
    if (x.empty()) return true;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *hi - *lo <= 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
}

// Harvey state form: state dimension r = max(p, q + 1), transition with the AR
// coefficients in the first column and ones on the superdiagonal.
struct StateSpace {
    int r = 1;
    std::vector<double> phi;  // length r
    std::vector<double> R;    // length r, (1, theta_1, ..., theta_{r-1})

    StateSpace(const std::vector<double>& ar, const std::vector<double>& ma) {
        r = std::max(static_cast<int>(ar.size()), static_cast<int>(ma.size()) + 1);
        phi.assign(static_cast<std::size_t>(r), 0.0);
        R.assign(static_cast<std::size_t>(r), 0.0);
        std::copy(ar.begin(), ar.end(), phi.begin());
        R[0] = 1.0;
        std::copy(ma.begin(), ma.end(), R.begin() + 1);
    }

    // P <- T P T' + R R', using `tp` as scratch
    void predict(Eigen::MatrixXd& P, Eigen::MatrixXd& tp) const {
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i) tp(i, j) = phi[static_cast<std::size_t>(i)] * P(0, j) + (i + 1 < r ? P(i + 1, j) : 0.0);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i)
                P(i, j) = tp(i, 0) * phi[static_cast<std::size_t>(j)] + (j + 1 < r ? tp(i, j + 1) : 0.0) +
                          R[static_cast<std::size_t>(i)] * R[static_cast<std::size_t>(j)];
    }

    void advance(Eigen::VectorXd& a) const {
        const double a0 = a[0];
        for (int i = 0; i < r; ++i) a[i] = phi[static_cast<std::size_t>(i)] * a0 + (i + 1 < r ? a[i + 1] : 0.0);
    }

    // Stationary covariance solving P = T P T' + R R' via vec(P) = (I - T (x) T)^-1 vec(R R').
    Eigen::MatrixXd stationary_covariance() const {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(r, r);
        for (int i = 0; i < r; ++i) {
            T(i, 0) = phi[static_cast<std::size_t>(i)];
            if (i + 1 < r) T(i, i + 1) = 1.0;
        }
        const int r2 = r * r;
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(r2, r2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                for (int k = 0; k < r; ++k)
                    for (int l = 0; l < r; ++l) A(i * r + j, k * r + l) -= T(i, k) * T(j, l);
        Eigen::VectorXd q(r2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) q[i * r + j] = R[static_cast<std::size_t>(i)] * R[static_cast<std::size_t>(j)];
        const Eigen::VectorXd v = A.partialPivLu().solve(q);
        Eigen::MatrixXd P(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) P(i, j) = v[i * r + j];
        return 0.5 * (P + P.transpose());
    }
};

struct FilterOutput {
    double ssq = 0.0;
    double sum_log_f = 0.0;
    bool ok = true;
    Eigen::VectorXd state;  // a_{m+1 | m}
};

// Innovations of y under unit innovation variance.
FilterOutput kalman(std::span<const double> y, const StateSpace& ss) {
    FilterOutput out;
    const int r = ss.r;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(r);
    Eigen::MatrixXd P = ss.stationary_covariance();
    if (!P.allFinite()) {
        out.ok = false;
        return out;
    }
    Eigen::MatrixXd prev(r, r), scratch(r, r);
    bool steady = false;
    Eigen::VectorXd gain(r);
    double F = 1.0, log_f = 0.0;
    for (double yt : y) {
        if (!steady) {
            F = P(0, 0);
            if (!(F > 1e-12)) {
                out.ok = false;
                return out;
            }
            gain = P.col(0) / F;
            log_f = std::log(F);
        }
        const double v = yt - a[0];
        out.ssq += v * v / F;
        out.sum_log_f += log_f;
        a += gain * v;
        ss.advance(a);
        if (!steady) {
            prev = P;
            for (int j = 0; j < r; ++j)
                for (int i = 0; i < r; ++i) P(i, j) -= gain[i] * prev(0, j);
            ss.predict(P, scratch);
            if ((P - prev).cwiseAbs().maxCoeff() < 1e-14 * std::max(1.0, P(0, 0))) steady = true;
        }
    }
    out.state = std::move(a);
    return out;
}

// Unconstrained -> coefficients of a stationary polynomial 1 - sum c_i B^i via partial autocorrelations.
std::vector<double> pacf_to_coefficients(std::span<const double> u) {
    const std::size_t k = u.size();
    std::vector<double> c(k, 0.0), tmp(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double r = std::tanh(u[j]);
        for (std::size_t i = 0; i < j; ++i) tmp[i] = c[i] - r * c[j - 1 - i];
        for (std::size_t i = 0; i < j; ++i) c[i] = tmp[i];
        c[j] = r;
    }
    return c;
}

// True when every root of 1 - sum c_i z^i lies outside the circle of radius 1 + 1e-6.
bool roots_outside(const std::vector<double>& c) {
    const auto k = static_cast<Eigen::Index>(c.size());
    if (k == 0) return true;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) comp(0, i) = c[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < k; ++i) comp(i, i - 1) = 1.0;
    const Eigen::VectorXcd ev = comp.eigenvalues();
    for (Eigen::Index i = 0; i < k; ++i)
        if (std::abs(ev[i]) * (1.0 + 1e-6) >= 1.0) return false;
    return true;
}

double aicc_of(double loglik, int k, std::size_t n_eff) {
    if (!std::isfinite(loglik)) return loglik > 0 ? -std::numeric_limits<double>::infinity()
                                                   : std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(n_eff);
    if (n - k - 1 <= 0) return std::numeric_limits<double>::infinity();
    return -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0);
}

bool include_intercept(std::span<const double> w, int d) {
    if (d == 0) return true;
    if (d >= 2) return false;
    const double m = mean_of(w);
    const double se = sd_of(w) / std::sqrt(static_cast<double>(w.size()));
    return std::abs(m) > 2.0 * se;
}

}  // namespace

KpssResult kpss_level_test(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 8) fail(ErrorKind::SeriesTooShort, "KPSS needs at least 8 observations");
    KpssResult res;
    res.lags = static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
    if (is_constant(x)) return res;
    const double m = mean_of(x);
    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = x[t] - m;
    double s2 = 0.0;
    for (double v : e) s2 += v * v;
    for (int l = 1; l <= res.lags; ++l) {
        double acc = 0.0;
        for (std::size_t t = static_cast<std::size_t>(l); t < n; ++t) acc += e[t] * e[t - static_cast<std::size_t>(l)];
        s2 += 2.0 * (1.0 - l / (res.lags + 1.0)) * acc;
    }
    s2 /= static_cast<double>(n);
    if (!(s2 > 0.0)) return res;
    double partial = 0.0, sum_sq = 0.0;
    for (double v : e) {
        partial += v;
        sum_sq += partial * partial;
    }
    res.statistic = sum_sq / (static_cast<double>(n) * static_cast<double>(n) * s2);
    res.reject = res.statistic > res.critical_value_5pct;
    return res;
}

int select_d(std::span<const double> x, int d_max) {
    if (d_max < 0) fail(ErrorKind::InvalidArgument, "d_max must be non-negative");
    if (x.size() < static_cast<std::size_t>(8 + d_max))
        fail(ErrorKind::SeriesTooShort, "select_d needs at least 8 + d_max observations");
    for (int d = 0; d < d_max; ++d) {
        const auto w = difference(x, d);
        if (!kpss_level_test(w).reject) return d;
    }
    return d_max;
}

std::vector<double> difference(std::span<const double> x, int d) {
    std::vector<double> w(x.begin(), x.end());
    for (int k = 0; k < d; ++k) {
        if (w.empty()) break;
        for (std::size_t t = 0; t + 1 < w.size(); ++t) w[t] = w[t + 1] - w[t];
        w.pop_back();
    }
    return w;
}

std::vector<double> integrate(std::span<const double> dx, std::span<const double> heads) {
    std::vector<double> w(dx.begin(), dx.end());
    for (std::size_t k = heads.size(); k-- > 0;) {
        std::vector<double> up(w.size() + 1);
        up[0] = heads[k];
        for (std::size_t t = 0; t < w.size(); ++t) up[t + 1] = up[t] + w[t];
        w = std::move(up);
    }
    return w;
}

double ArimaModel::mean() const {
    if (!has_intercept) return 0.0;
    const double s = std::accumulate(ar.begin(), ar.end(), 0.0);
    return intercept / (1.0 - s);
}

double arima_log_likelihood(std::span<const double> w, const std::vector<double>& ar, const std::vector<double>& ma,
                            double mean, double* sigma2_out) {
    std::vector<double> y(w.begin(), w.end());
    for (double& v : y) v -= mean;
    const StateSpace ss(ar, ma);
    const auto f = kalman(y, ss);
    const double m = static_cast<double>(y.size());
    if (!f.ok || !std::isfinite(f.ssq)) return -std::numeric_limits<double>::infinity();
    const double sigma2 = f.ssq / m;
    if (sigma2_out) *sigma2_out = sigma2;
    if (!(sigma2 > 0.0)) return std::numeric_limits<double>::infinity();
    return -0.5 * m * (std::log(kTwoPi * sigma2) + 1.0) - 0.5 * f.sum_log_f;
}

ArimaModel fit_arima(std::span<const double> x, int p, int d, int q, bool with_intercept) {
    if (p < 0 || d < 0 || q < 0) fail(ErrorKind::InvalidArgument, "ARIMA orders must be non-negative");
    if (static_cast<long>(x.size()) - d <= p + q + 2)
        fail(ErrorKind::SeriesTooShort, "series too short for ARIMA(" + std::to_string(p) + "," + std::to_string(d) +
                                            "," + std::to_string(q) + ")");
    const auto w = difference(x, d);
    const std::size_t m = w.size();

    ArimaModel model;
    model.p = p;
    model.d = d;
    model.q = q;
    model.has_intercept = with_intercept;
    model.ar.assign(static_cast<std::size_t>(p), 0.0);
    model.ma.assign(static_cast<std::size_t>(q), 0.0);
    model.fitted_on = x.size();
    const int k = p + q + (with_intercept ? 1 : 0) + 1;

    const double wbar = mean_of(w);
    const bool constant = is_constant(w) && (with_intercept || std::abs(wbar) <= 1e-12);
    if (constant) {
        model.intercept = with_intercept ? wbar : 0.0;
        model.sigma2 = 0.0;
        model.log_likelihood = std::numeric_limits<double>::infinity();
        model.aicc = -std::numeric_limits<double>::infinity();
        return model;
    }

    if (p == 0 && q == 0) {
        const double mu = with_intercept ? wbar : 0.0;
        double s = 0.0;
        for (double v : w) s += (v - mu) * (v - mu);
        model.intercept = mu;
        model.sigma2 = s / static_cast<double>(m);
        model.log_likelihood = -0.5 * static_cast<double>(m) * (std::log(kTwoPi * model.sigma2) + 1.0);
        model.aicc = aicc_of(model.log_likelihood, k, m);
        return model;
    }

    const double scale = std::max(sd_of(w), 1e-8);
    auto unpack = [&](const Eigen::VectorXd& u, std::vector<double>& ar, std::vector<double>& ma, double& mu) {
        ar = pacf_to_coefficients(std::span<const double>(u.data(), static_cast<std::size_t>(p)));
        auto c = pacf_to_coefficients(std::span<const double>(u.data() + p, static_cast<std::size_t>(q)));
        ma.resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) ma[i] = -c[i];
        mu = with_intercept ? wbar + scale * u[p + q] : 0.0;
    };
    auto objective = [&](const Eigen::VectorXd& u) {
        std::vector<double> ar, ma;
        double mu = 0.0;
        unpack(u, ar, ma, mu);
        const double ll = arima_log_likelihood(w, ar, ma, mu);
        return -ll / static_cast<double>(m);
    };

    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(p + q + (with_intercept ? 1 : 0));
    const auto opt = detail::bfgs_minimize(objective, u0, 200, 1e-7);
    if (!std::isfinite(opt.value)) fail(ErrorKind::NonConvergence, "likelihood is not finite at the optimum");

    double mu = 0.0;
    unpack(opt.x, model.ar, model.ma, mu);
    std::vector<double> ma_c(model.ma.size());
    for (std::size_t i = 0; i < ma_c.size(); ++i) ma_c[i] = -model.ma[i];
    if (!roots_outside(model.ar) || !roots_outside(ma_c))
        fail(ErrorKind::NonInvertible, "estimate lies on the stationarity or invertibility boundary");

    double sigma2 = 0.0;
    model.log_likelihood = arima_log_likelihood(w, model.ar, model.ma, mu, &sigma2);
    model.sigma2 = sigma2;
    model.intercept = with_intercept ? mu * (1.0 - std::accumulate(model.ar.begin(), model.ar.end(), 0.0)) : 0.0;
    model.aicc = aicc_of(model.log_likelihood, k, m);
    model.converged = opt.converged;
    return model;
}

ArimaModel auto_arima(std::span<const double> x, const AutoArimaOptions& options) {
    if (x.size() < 10) fail(ErrorKind::SeriesTooShort, "auto_arima needs at least 10 observations");
    const int d = select_d(x, options.d_max);
    const auto w = difference(x, d);
    const bool intercept = is_constant(w) ? (d < 2 && (d == 0 || std::abs(mean_of(w)) > 1e-12))
                                          : include_intercept(w, d);

    std::map<std::pair<int, int>, std::optional<ArimaModel>> cache;
    auto evaluate = [&](int p, int q) -> const std::optional<ArimaModel>& {
        auto it = cache.find({p, q});
        if (it != cache.end()) return it->second;
        std::optional<ArimaModel> fitted;
        try {
            fitted = fit_arima(x, p, d, q, intercept);
            if (std::isnan(fitted->aicc) || fitted->aicc == std::numeric_limits<double>::infinity())
                fitted.reset();
        } catch (const Error&) {
            fitted.reset();
        }
        return cache.emplace(std::make_pair(p, q), std::move(fitted)).first->second;
    };
    auto better = [](const ArimaModel& a, const ArimaModel& b) {
        return std::make_tuple(a.aicc, a.p + a.q, a.p) < std::make_tuple(b.aicc, b.p + b.q, b.p);
    };

    std::optional<ArimaModel> best;
    auto consider = [&](int p, int q) {
        if (p < 0 || q < 0 || p > options.max_p || q > options.max_q) return false;
        const auto& m = evaluate(p, q);
        if (m && (!best || better(*m, *best))) {
            best = m;
            return true;
        }
        return false;
    };

    if (!options.stepwise) {
        for (int p = 0; p <= options.max_p; ++p)
            for (int q = 0; q <= options.max_q; ++q) consider(p, q);
    } else {
        for (auto [p, q] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}}) consider(p, q);
        // a constant series fits perfectly at (0, 0); no neighbour can improve on it
        for (bool moved = best.has_value() && std::isfinite(best->aicc); moved;) {
            moved = false;
            const int p0 = best->p, q0 = best->q;
            for (int dp = -1; dp <= 1; ++dp)
                for (int dq = -1; dq <= 1; ++dq)
                    if ((dp || dq) && consider(p0 + dp, q0 + dq)) moved = true;
        }
    }
    if (!best) fail(ErrorKind::AllCandidatesFailed, "no ARIMA candidate could be fitted");
    return *best;
}

ScoreForecast forecast(const ArimaModel& model, std::span<const double> x, int h) {
    if (h < 1) fail(ErrorKind::InvalidArgument, "forecast horizon must be >= 1");
    if (x.empty()) fail(ErrorKind::SeriesTooShort, "cannot forecast an empty series");
    ScoreForecast out;
    out.mean.resize(static_cast<std::size_t>(h));
    out.variance.resize(static_cast<std::size_t>(h));

    // psi-weights of phi(B)(1 - B)^d
    std::vector<double> phi_star(model.ar.begin(), model.ar.end());
    for (int k = 0; k < model.d; ++k) {
        std::vector<double> next(phi_star.size() + 1, 0.0);
        // (1 - sum c_i B^i)(1 - B) = 1 - sum (c_i - c_{i-1}) B^i with c_0 = -1
        for (std::size_t i = 1; i <= next.size(); ++i) {
            const double ci = i <= phi_star.size() ? phi_star[i - 1] : 0.0;
            const double cprev = i == 1 ? -1.0 : phi_star[i - 2];
            next[i - 1] = ci - cprev;
        }
        phi_star = std::move(next);
    }
    std::vector<double> psi(static_cast<std::size_t>(h), 0.0);
    psi[0] = 1.0;
    double acc = 0.0;
    for (int j = 0; j < h; ++j) {
        if (j > 0) {
            double v = j <= model.q ? model.ma[static_cast<std::size_t>(j - 1)] : 0.0;
            for (int i = 1; i <= std::min<int>(j, static_cast<int>(phi_star.size())); ++i)
                v += phi_star[static_cast<std::size_t>(i - 1)] * psi[static_cast<std::size_t>(j - i)];
            psi[static_cast<std::size_t>(j)] = v;
        }
        acc += psi[static_cast<std::size_t>(j)] * psi[static_cast<std::size_t>(j)];
        out.variance[static_cast<std::size_t>(j)] = model.sigma2 * acc;
    }

    if (x.size() <= static_cast<std::size_t>(model.d)) {
        std::fill(out.mean.begin(), out.mean.end(), x.back());
        return out;
    }

    // levels[k] is the k-th difference of x
    std::vector<std::vector<double>> levels{std::vector<double>(x.begin(), x.end())};
    for (int k = 0; k < model.d; ++k) levels.push_back(difference(levels.back(), 1));
    const double mu = model.mean();
    std::vector<double> y = levels.back();
    for (double& v : y) v -= mu;
    const StateSpace ss(model.ar, model.ma);
    auto f = kalman(y, ss);
    std::vector<double> path(static_cast<std::size_t>(h));
    if (f.ok) {
        for (int i = 0; i < h; ++i) {
            path[static_cast<std::size_t>(i)] = f.state[0] + mu;
            ss.advance(f.state);
        }
    } else {
        std::fill(path.begin(), path.end(), mu);
    }
    for (int k = model.d - 1; k >= 0; --k) {
        double level = levels[static_cast<std::size_t>(k)].back();
        for (double& v : path) {
            level += v;
            v = level;
        }
    }
    out.mean = std::move(path);
    return out;
}

ForecasterFactory auto_arima_factory(AutoArimaOptions options, bool refit) {
    return [options, refit](std::span<const double> full) -> ScoreForecaster {
        std::optional<ArimaModel> model;
        try {
            model = auto_arima(full, options);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SeriesTooShort) throw;
        }
        const auto naive = naive_factory()(full);
        return [model, options, refit, naive](std::span<const double> history, int h) {
            if (refit && history.size() >= 10) return forecast(auto_arima(history, options), history, h);
            if (!model) return naive(history, h);
            return forecast(*model, history, h);
        };
    };
}

}  // namespace gfts
