#include "bubblecluster/quadrature.hpp"

#include "bubblecluster/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

namespace bubblecluster {

namespace {

// Kronrod 15 nodes (non-negative half) and weights, with the embedded
// Gauss 7-point weights on the odd-indexed nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double lo;
    double hi;
    double value;
    double error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <class G>
Segment kronrod15(const G& g, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = g(mid);
    double kronrod = fc * kKronrod[7];
    double gauss = fc * kGauss[3];
    for (int k = 0; k < 7; ++k) {
        const double dx = half * kNodes[k];
        const double pair = g(mid - dx) + g(mid + dx);
        kronrod += kKronrod[k] * pair;
        if (k % 2 == 1) {
            gauss += kGauss[k / 2] * pair;
        }
    }
    return {lo, hi, kronrod * half, std::abs((kronrod - gauss) * half)};
}

double radial_power(double r, int n) {
    return n == 1 ? 1.0 : std::pow(r, n - 1);
}

} // namespace

QuadratureResult radial_improper_quadrature(const RadialIntegrand& f, int n,
                                            const QuadratureSettings& settings) {
    int evaluations = 0;
    auto mapped = [&](double t) {
        ++evaluations;
        if (t <= 0.0 || t >= 1.0) {
            return 0.0;
        }
        const double s = 1.0 - t;
        const double r = t / s;
        return f(r) * radial_power(r, n) / (s * s);
    };

    std::priority_queue<Segment> queue;
    double total = 0.0;
    double total_error = 0.0;
    constexpr int kInitial = 8;
    for (int k = 0; k < kInitial; ++k) {
        Segment s = kronrod15(mapped, double(k) / kInitial, double(k + 1) / kInitial);
        total += s.value;
        total_error += s.error;
        queue.push(s);
    }

    auto converged = [&] {
        return total_error <= settings.tol * std::max(1.0, std::abs(total));
    };

    while (!converged()) {
        if (static_cast<int>(queue.size()) >= settings.max_intervals) {
            throw ConvergenceError("radial quadrature: tolerance not met within interval budget",
                                   total, total_error);
        }
        const Segment worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            throw ConvergenceError("radial quadrature: interval underflow", total, total_error);
        }
        const Segment left = kronrod15(mapped, worst.lo, mid);
        const Segment right = kronrod15(mapped, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }

    // Re-sum to shed the drift of the running totals.
    double value = 0.0;
    double error = 0.0;
    while (!queue.empty()) {
        value += queue.top().value;
        error += queue.top().error;
        queue.pop();
    }
    if (!std::isfinite(value)) {
        throw ConvergenceError("radial quadrature: non-finite value", value,
                               std::numeric_limits<double>::infinity());
    }
    return {value, error, evaluations};
}

QuadratureResult radial_improper_quadrature_exp_sinh(const RadialIntegrand& f, int n,
                                                     const QuadratureSettings& settings) {
    boost::math::quadrature::exp_sinh<double> integrator;
    int evaluations = 0;
    auto g = [&](double r) {
        ++evaluations;
        const double v = f(r) * radial_power(r, n);
        // The far tail overflows r^{n-1} before the decaying factor underflows.
        if (!std::isfinite(v) && r > 1.0) {
            return 0.0;
        }
        return v;
    };
    double error = 0.0;
    double l1 = 0.0;
    double value = 0.0;
    try {
        value = integrator.integrate(g, 0.0, std::numeric_limits<double>::infinity(), settings.tol,
                                     &error, &l1);
    } catch (const std::exception& e) {
        throw ConvergenceError(std::string("exp-sinh quadrature: ") + e.what(),
                               std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::infinity());
    }
    if (!std::isfinite(value) || error > settings.tol * std::max(1.0, std::abs(value)) * 100.0) {
        throw ConvergenceError("exp-sinh quadrature: tolerance not met", value, error);
    }
    return {value, error, evaluations};
}

} // namespace bubblecluster
