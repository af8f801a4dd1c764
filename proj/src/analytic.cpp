#include "bubblecluster/analytic.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace bubblecluster {

double critical_exponent(int n) {
    return (n + 2.0) / (n - 2.0);
}

double bubble_c0(int n) {
    return std::pow(static_cast<double>(n) * (n - 2), (n - 2) / 4.0);
}

int log_power(int n) {
    return n == 4 ? 1 : 0;
}

double cluster_gamma(int n) {
    return (n - 4.0) / (2.0 * n);
}

double sphere_measure(int n) {
    return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

void require_supported_dimension(int n) {
    if (n < 3 || n > 6) {
        throw DomainError("dimension " + std::to_string(n) + " outside the supported range 3..6");
    }
}

void BubbleParams::validate() const {
    require_supported_dimension(dim());
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DomainError("bubble rate must be positive and finite");
    }
    if (!center.allFinite()) {
        throw DomainError("bubble center must be finite");
    }
}

double bubble_radial(int n, double lambda, double r) {
    const double half = (n - 2) / 2.0;
    return bubble_c0(n) * std::pow(lambda, half) * std::pow(1.0 + lambda * lambda * r * r, -half);
}

double bubble_eval(const BubbleParams& p, const Point& x) {
    return bubble_radial(p.dim(), p.lambda, (x - p.center).norm());
}

BubbleDerivatives bubble_derivatives(const BubbleParams& p, const Point& x) {
    const int n = p.dim();
    const Point diff = x - p.center;
    const double l2r2 = p.lambda * p.lambda * diff.squaredNorm();
    const double delta = bubble_eval(p, x);
    BubbleDerivatives out;
    out.dl = 0.5 * (n - 2) * delta * (1.0 - l2r2) / (1.0 + l2r2);
    out.da = ((n - 2) * delta * p.lambda / (1.0 + l2r2)) * diff;
    return out;
}

InteractionValue epsilon_ij(const BubbleParams& pi, const BubbleParams& pj) {
    if (!(pi.lambda > 0.0) || !(pj.lambda > 0.0)) {
        throw DomainError("epsilon_ij requires positive rates");
    }
    if (pi.dim() != pj.dim()) {
        throw DomainError("epsilon_ij: dimension mismatch");
    }
    const int n = pi.dim();
    const double li = pi.lambda;
    const double lj = pj.lambda;
    const Point diff = pi.center - pj.center;
    const double d2 = diff.squaredNorm();
    const double q = li / lj + lj / li + li * lj * d2;

    InteractionValue out;
    out.eps = std::pow(q, (2.0 - n) / 2.0);
    // d(eps)/dq = (2-n)/2 q^{-n/2}
    const double deps_dq = 0.5 * (2.0 - n) * std::pow(q, -0.5 * n);
    out.d_lambda_i = deps_dq * (li / lj - lj / li + li * lj * d2);
    out.d_lambda_j = deps_dq * (lj / li - li / lj + li * lj * d2);
    out.d_a_i = (deps_dq * 2.0 * lj) * diff;
    return out;
}

double eta_of_eps(int n, double eps) {
    if (!(eps > 0.0) || !(eps < 1.0)) {
        throw DomainError("eta_of_eps requires 0 < eps < 1");
    }
    if (n == 4) {
        return std::pow(std::abs(std::log(eps)), -0.25);
    }
    return std::pow(eps, cluster_gamma(n));
}

double projection_shape_R1(int n, double lambda, double r) {
    const int s = log_power(n);
    const double tail = r > 0.0 ? r * r * std::pow(std::abs(std::log(r)), s) : 0.0;
    return std::pow(std::log(lambda), s) / (lambda * lambda) + tail;
}

double projection_shape_R2(double lambda, double r) {
    return 1.0 / (lambda * lambda) + r / lambda;
}

double radial_equation_residual(int n, double h) {
    require_supported_dimension(n);
    if (!(h > 0.0) || h > 0.2) {
        throw DomainError("radial_equation_residual requires 0 < h <= 0.2");
    }
    const double p = critical_exponent(n);
    auto u = [n](double r) { return bubble_radial(n, 1.0, r); };
    double worst = 0.0;
    for (double r : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const double up = u(r + h);
        const double um = u(r - h);
        const double uc = u(r);
        const double second = (up - 2.0 * uc + um) / (h * h);
        const double first = (up - um) / (2.0 * h);
        const double res = -(second + (n - 1) / r * first) - std::pow(uc, p);
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

} // namespace bubblecluster
