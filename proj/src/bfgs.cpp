#include "bfgs.hpp"

#include <cmath>
#include <limits>

namespace gfts::detail {

namespace {

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                         double fx) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd y = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
        y[i] = x[i] + h;
        const double fp = safe(f(y));
        y[i] = x[i] - h;
        const double fm = safe(f(y));
        y[i] = x[i];
        if (std::isfinite(fp) && std::isfinite(fm))
            g[i] = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp))
            g[i] = (fp - fx) / h;
        else if (std::isfinite(fm))
            g[i] = (fx - fm) / h;
        else
            g[i] = 0.0;
    }
    return g;
}

}  // namespace

BfgsResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                         int max_iterations, double gradient_tolerance) {
    const auto n = x0.size();
    BfgsResult r;
    r.x = std::move(x0);
    r.value = safe(f(r.x));
    if (n == 0 || !std::isfinite(r.value)) {
        r.converged = n == 0;
        return r;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = gradient(f, r.x, r.value);
    for (int it = 0; it < max_iterations; ++it) {
        r.iterations = it + 1;
        if (g.cwiseAbs().maxCoeff() < gradient_tolerance) {
            r.converged = true;
            return r;
        }
        Eigen::VectorXd dir = -H * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            H.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            x_new = r.x + step * dir;
            f_new = safe(f(x_new));
            if (f_new <= r.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // no descent along the quasi-Newton direction; a steepest-descent restart already failed
            if (H.isIdentity()) {
                r.converged = true;
                return r;
            }
            H.setIdentity();
            continue;
        }
        const Eigen::VectorXd g_new = gradient(f, x_new, f_new);
        const Eigen::VectorXd s = x_new - r.x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double change = r.value - f_new;
        r.x = x_new;
        r.value = f_new;
        g = g_new;
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        if (change <= 1e-12 * (std::abs(r.value) + 1e-12)) {
            r.converged = true;
            return r;
        }
    }
    return r;
}

}  // namespace gfts::detail
