#pragma once

#include <Eigen/Dense>

#include <functional>

namespace gfts::detail {

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with central-difference gradients and Armijo
/// backtracking. Non-finite objective values are treated as +inf.
BfgsResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                         int max_iterations = 100, double gradient_tolerance = 1e-6);

}  // namespace gfts::detail
