#pragma once

#include <functional>

namespace bubblecluster {

struct QuadratureSettings {
    /// Target error, relative to max(1, |value|).
    double tol = 1e-12;
    int max_intervals = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int evaluations = 0;
};

using RadialIntegrand = std::function<double(double)>;

/// Integral of f(r) r^{n-1} over (0, inf).
///
/// Maps (0, inf) onto (0, 1) with r = t/(1-t) and runs globally adaptive
/// 15-point Gauss-Kronrod bisection on the image. Throws ConvergenceError
/// carrying the best value when the interval budget runs out before the
/// error estimate meets the tolerance, which is how divergent integrands
/// surface.
QuadratureResult radial_improper_quadrature(const RadialIntegrand& f, int n,
                                            const QuadratureSettings& settings = {});

/// Same integral by double-exponential (exp-sinh) quadrature in r. Used as
/// an independent cross-check of radial_improper_quadrature.
QuadratureResult radial_improper_quadrature_exp_sinh(const RadialIntegrand& f, int n,
                                                     const QuadratureSettings& settings = {});

} // namespace bubblecluster
