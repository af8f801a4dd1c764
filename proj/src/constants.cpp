#include "bubblecluster/constants.hpp"

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bubblecluster {

namespace {

QuadratureResult integrate(const RadialIntegrand& f, int n, const QuadratureSettings& quad,
                           QuadratureScheme scheme) {
    if (scheme == QuadratureScheme::ExpSinh) {
        return radial_improper_quadrature_exp_sinh(f, n, quad);
    }
    return radial_improper_quadrature(f, n, quad);
}

double rel_diff(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) {
        return 0.0;
    }
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace

double AsymptoticConstants::sigma(double V_at_anchor) const {
    if (!(V_at_anchor > 0.0)) {
        throw DomainError("sigma requires V(b) > 0");
    }
    return std::pow(c2bar / c2_of_n, 1.0 / n) * std::pow(c2 / (c_of_n * V_at_anchor), gamma);
}

AsymptoticConstants compute_constants(int n, const QuadratureSettings& quad, QuadratureScheme scheme) {
    require_supported_dimension(n);
    AsymptoticConstants c;
    c.n = n;
    c.c0 = bubble_c0(n);
    c.sigma_n = log_power(n);
    c.gamma = cluster_gamma(n);
    c.outside_theorem_scope = n < 4;

    const double omega = sphere_measure(n);
    const double crit = 2.0 * n / (n - 2.0);
    const double c0_crit = std::pow(c.c0, crit);
    const double c0_sq = c.c0 * c.c0;

    auto s_n = integrate([n](double r) { return std::pow(1.0 + r * r, -n); }, n, quad, scheme);
    c.S_n = c0_crit * omega * s_n.value;
    c.errors.S_n = c0_crit * omega * s_n.error_estimate;

    auto c2 = integrate(
        [n](double r) {
            const double r2 = r * r;
            return (r2 - 1.0) * std::log1p(r2) * std::pow(1.0 + r2, -(n + 1));
        },
        n, quad, scheme);
    const double c2_factor = 0.25 * (n - 2.0) * (n - 2.0) * c0_crit * omega;
    c.c2 = c2_factor * c2.value;
    c.errors.c2 = c2_factor * c2.error_estimate;

    auto c2bar = integrate([n](double r) { return std::pow(1.0 + r * r, -(n + 2) / 2.0); }, n,
                           quad, scheme);
    c.c2bar = c0_crit * omega * c2bar.value;
    c.errors.c2bar = c0_crit * omega * c2bar.error_estimate;

    if (n == 4) {
        c.c_of_n = c0_sq * omega;
        c.c2_of_n = 0.5 * c0_sq * omega;
    } else if (n >= 5) {
        auto cn = integrate(
            [n](double r) {
                const double r2 = r * r;
                return (r2 - 1.0) * std::pow(1.0 + r2, -(n - 1));
            },
            n, quad, scheme);
        const double cn_factor = 0.5 * (n - 2.0) * c0_sq * omega;
        c.c_of_n = cn_factor * cn.value;
        c.errors.c_of_n = cn_factor * cn.error_estimate;

        auto c2n = integrate(
            [n](double r) {
                const double r2 = r * r;
                return r2 * std::pow(1.0 + r2, -(n - 1));
            },
            n, quad, scheme);
        const double c2n_factor = (n - 2.0) / n * c0_sq * omega;
        c.c2_of_n = c2n_factor * c2n.value;
        c.errors.c2_of_n = c2n_factor * c2n.error_estimate;
    } else {
        c.c_of_n = std::numeric_limits<double>::quiet_NaN();
        c.c2_of_n = std::numeric_limits<double>::quiet_NaN();
    }
    return c;
}

double constants_scheme_disagreement(const AsymptoticConstants& a, const AsymptoticConstants& b) {
    if (a.n != b.n) {
        throw DomainError("constants of different dimensions");
    }
    return std::max({rel_diff(a.S_n, b.S_n), rel_diff(a.c2, b.c2), rel_diff(a.c2bar, b.c2bar),
                     rel_diff(a.c_of_n, b.c_of_n), rel_diff(a.c2_of_n, b.c2_of_n)});
}

nlohmann::json to_json(const AsymptoticConstants& c) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isnan(v)) {
            return nullptr;
        }
        return v;
    };
    return {
        {"n", c.n},
        {"c0", c.c0},
        {"S_n", c.S_n},
        {"c2", c.c2},
        {"c2bar", c.c2bar},
        {"c_of_n", num(c.c_of_n)},
        {"c2_of_n", num(c.c2_of_n)},
        {"sigma_n", c.sigma_n},
        {"gamma", c.gamma},
        {"outside_theorem_scope", c.outside_theorem_scope},
        {"error_estimates",
         {{"S_n", c.errors.S_n},
          {"c2", c.errors.c2},
          {"c2bar", c.errors.c2bar},
          {"c_of_n", c.errors.c_of_n},
          {"c2_of_n", c.errors.c2_of_n}}},
    };
}

} // namespace bubblecluster
