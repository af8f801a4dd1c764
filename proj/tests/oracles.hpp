#pragma once

// Independent reference computations used only by the tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace oracle {

/// Closed form of the radial integral of r^{a-1} (1+r^2)^{-b} over (0, inf):
/// one half of the Beta function B(a/2, b - a/2).
inline double radial_beta(double a, double b) {
    return 0.5 * std::beta(a / 2.0, b - a / 2.0);
}

inline double sphere(int n) {
    return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

/// Central difference of a scalar function along one coordinate direction.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error with a floor on the denominator.
inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) {
        v[k] = dist(rng);
    }
    return v;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace oracle
