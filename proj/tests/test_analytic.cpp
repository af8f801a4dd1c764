#include "bubblecluster/analytic.hpp"
#include "bubblecluster/constants.hpp"
#include "bubblecluster/errors.hpp"

#include "oracles.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace bubblecluster;

namespace {

Point unit(int n, int k, double r = 1.0) {
    Point e = Point::Zero(n);
    e[k] = r;
    return e;
}

// Radial integral of r^{a-1} (1+r^2)^{-b} ln(1+r^2): minus the b-derivative
// of the Beta closed form.
double radial_beta_log(double a, double b) {
    using boost::math::digamma;
    return oracle::radial_beta(a, b) * (digamma(b) - digamma(b - a / 2.0));
}

} // namespace

TEST_CASE("bubble_eval closed-form values") {
    BubbleParams p{Point::Zero(4), 1.0};
    CHECK(bubble_eval(p, Point::Zero(4)) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-15));
    CHECK(bubble_c0(4) == doctest::Approx(2.828427).epsilon(1e-6));

    for (double r : {0.1, 0.7, 3.0}) {
        CHECK(bubble_eval(p, unit(4, 0, r)) == doctest::Approx(bubble_eval(p, unit(4, 1, r))).epsilon(1e-15));
    }

    BubbleParams q{Point::Zero(5), 10.0};
    CHECK(bubble_c0(5) == doctest::Approx(7.62199).epsilon(1e-5));
    CHECK(bubble_eval(q, Point::Zero(5)) == doctest::Approx(bubble_c0(5) * std::pow(10.0, 1.5)).epsilon(1e-14));
}

TEST_CASE("bubble scaling identity and peak") {
    std::mt19937_64 rng(11);
    for (int n = 3; n <= 6; ++n) {
        for (int s = 0; s < 20; ++s) {
            BubbleParams p{oracle::random_vector(rng, n, 0.3), oracle::uniform(rng, 0.5, 30.0)};
            const Point x = oracle::random_vector(rng, n, 0.5);
            const BubbleParams unit_bubble{Point::Zero(n), 1.0};
            const double rescaled = std::pow(p.lambda, (n - 2) / 2.0) *
                                    bubble_eval(unit_bubble, p.lambda * (x - p.center));
            CHECK(bubble_eval(p, x) == doctest::Approx(rescaled).epsilon(1e-13));
            CHECK(bubble_eval(p, x) > 0.0);
            CHECK(bubble_eval(p, x) <= bubble_eval(p, p.center));
        }
    }
}

TEST_CASE("bubble derivatives at the peak and against finite differences") {
    BubbleParams p{Point::Constant(4, 0.2), 3.0};
    auto at_peak = bubble_derivatives(p, p.center);
    CHECK(at_peak.dl == doctest::Approx(1.0 * bubble_eval(p, p.center)));
    CHECK(at_peak.da.norm() == 0.0);

    std::mt19937_64 rng(5);
    for (int n = 3; n <= 6; ++n) {
        for (int s = 0; s < 25; ++s) {
            BubbleParams q{oracle::random_vector(rng, n, 0.3), oracle::uniform(rng, 1.0, 20.0)};
            const Point x = q.center + oracle::random_vector(rng, n, 1.5 / q.lambda);
            const auto d = bubble_derivatives(q, x);
            const double h = 1e-5;
            const double fd_l = q.lambda * oracle::central_difference(
                                               [&](double l) {
                                                   BubbleParams t = q;
                                                   t.lambda = l;
                                                   return bubble_eval(t, x);
                                               },
                                               q.lambda, h * q.lambda);
            CHECK(oracle::rel_err(d.dl, fd_l, 1e-8 * bubble_eval(q, x)) < 1e-6);
            for (int k = 0; k < n; ++k) {
                const double fd_a = oracle::central_difference(
                                        [&](double ak) {
                                            BubbleParams t = q;
                                            t.center[k] = ak;
                                            return bubble_eval(t, x);
                                        },
                                        q.center[k], h / q.lambda) /
                                    q.lambda;
                CHECK(oracle::rel_err(d.da[k], fd_a, 1e-8 * bubble_eval(q, x)) < 1e-6);
            }
        }
    }
}

TEST_CASE("epsilon_ij closed-form examples and symmetry") {
    BubbleParams a{Point::Zero(4), 10.0};
    BubbleParams b{Point::Zero(4), 10.0};
    CHECK(epsilon_ij(a, b).eps == doctest::Approx(0.5).epsilon(1e-15));
    b.center = unit(4, 2, 1.0);
    CHECK(epsilon_ij(a, b).eps == doctest::Approx(1.0 / 102.0).epsilon(1e-14));

    std::mt19937_64 rng(3);
    for (int s = 0; s < 50; ++s) {
        const int n = 3 + s % 4;
        BubbleParams pi{oracle::random_vector(rng, n, 0.5), oracle::uniform(rng, 1.0, 40.0)};
        BubbleParams pj{oracle::random_vector(rng, n, 0.5), oracle::uniform(rng, 1.0, 40.0)};
        const auto ij = epsilon_ij(pi, pj);
        const auto ji = epsilon_ij(pj, pi);
        CHECK(ij.eps == doctest::Approx(ji.eps).epsilon(1e-14));
        CHECK(ij.d_lambda_i == doctest::Approx(ji.d_lambda_j).epsilon(1e-13));
    }
}

TEST_CASE("epsilon_ij decreases with separation and with rate disparity") {
    const int n = 5;
    BubbleParams pi{Point::Zero(n), 8.0};
    double previous = 1.0;
    for (double d = 0.0; d < 2.0; d += 0.05) {
        BubbleParams pj{unit(n, 0, d), 8.0};
        const double e = epsilon_ij(pi, pj).eps;
        CHECK(e < previous);
        previous = e;
    }
    previous = 1.0;
    for (double ratio = 1.0; ratio < 20.0; ratio *= 1.3) {
        BubbleParams pj{unit(n, 1, 0.1), 8.0 * ratio};
        const double e = epsilon_ij(pi, pj).eps;
        CHECK(e < previous);
        previous = e;
    }
}

TEST_CASE("epsilon_ij derivatives against finite differences") {
    std::mt19937_64 rng(17);
    for (int s = 0; s < 60; ++s) {
        const int n = 4 + s % 3;
        BubbleParams pi{oracle::random_vector(rng, n, 0.3), oracle::uniform(rng, 2.0, 30.0)};
        BubbleParams pj{oracle::random_vector(rng, n, 0.3), oracle::uniform(rng, 2.0, 30.0)};
        const auto v = epsilon_ij(pi, pj);
        const double h = 1e-5;
        auto eps_with = [&](auto mutate) {
            BubbleParams a = pi;
            BubbleParams b = pj;
            mutate(a, b);
            return epsilon_ij(a, b).eps;
        };
        const double fd_li =
            pi.lambda * (eps_with([&](auto& a, auto&) { a.lambda *= 1 + h; }) -
                         eps_with([&](auto& a, auto&) { a.lambda *= 1 - h; })) /
            (2 * h * pi.lambda);
        const double fd_lj =
            pj.lambda * (eps_with([&](auto&, auto& b) { b.lambda *= 1 + h; }) -
                         eps_with([&](auto&, auto& b) { b.lambda *= 1 - h; })) /
            (2 * h * pj.lambda);
        CHECK(oracle::rel_err(v.d_lambda_i, fd_li, 1e-9 * v.eps) < 1e-6);
        CHECK(oracle::rel_err(v.d_lambda_j, fd_lj, 1e-9 * v.eps) < 1e-6);
        for (int k = 0; k < n; ++k) {
            const double fd =
                (eps_with([&](auto& a, auto&) { a.center[k] += h / pi.lambda; }) -
                 eps_with([&](auto& a, auto&) { a.center[k] -= h / pi.lambda; })) /
                (2 * h);
            // lambda_i^{-1} d/da = d/d(lambda_i a) with step h/lambda_i in a
            CHECK(oracle::rel_err(v.d_a_i[k], fd, 1e-3 * v.d_a_i.norm()) < 1e-6);
        }
    }
}

TEST_CASE("eta_of_eps") {
    CHECK(eta_of_eps(4, std::exp(-16.0)) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(eta_of_eps(5, 1e-10) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(eta_of_eps(6, 0.01) == doctest::Approx(0.46416).epsilon(1e-5));
    CHECK_THROWS_AS(eta_of_eps(5, 1.0), DomainError);
    CHECK_THROWS_AS(eta_of_eps(4, 2.0), DomainError);
}

TEST_CASE("radial bubble equation residual converges at second order") {
    for (int n = 3; n <= 6; ++n) {
        const double coarse = radial_equation_residual(n, 0.02);
        const double fine = radial_equation_residual(n, 0.01);
        CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("constants against Beta-function closed forms") {
    const double pi = std::numbers::pi;
    auto c4 = compute_constants(4);
    CHECK(oracle::rel_err(c4.S_n, 32 * pi * pi / 3) < 1e-10);
    CHECK(oracle::rel_err(c4.c2bar, 32 * pi * pi) < 1e-10);
    CHECK(oracle::rel_err(c4.c_of_n, 16 * pi * pi) < 1e-14);
    CHECK(oracle::rel_err(c4.c2_of_n, 8 * pi * pi) < 1e-14);
    CHECK(c4.sigma_n == 1);
    CHECK(c4.gamma == 0.0);

    for (int n = 4; n <= 6; ++n) {
        const auto c = compute_constants(n);
        const double w = oracle::sphere(n);
        const double c0 = std::pow(n * (n - 2.0), (n - 2) / 4.0);
        const double cc = std::pow(c0, 2.0 * n / (n - 2));
        CHECK(oracle::rel_err(c.S_n, cc * w * oracle::radial_beta(n, n)) < 1e-10);
        CHECK(oracle::rel_err(c.c2bar, cc * w * oracle::radial_beta(n, (n + 2) / 2.0)) < 1e-10);
        const double c2 = 0.25 * (n - 2) * (n - 2) * cc * w *
                          (radial_beta_log(n + 2, n + 1) - radial_beta_log(n, n + 1));
        CHECK(oracle::rel_err(c.c2, c2) < 1e-10);
        if (n >= 5) {
            const double cn = 0.5 * (n - 2) * c0 * c0 * w *
                              (oracle::radial_beta(n + 2, n - 1) - oracle::radial_beta(n, n - 1));
            const double c2n = (n - 2.0) / n * c0 * c0 * w * oracle::radial_beta(n + 2, n - 1);
            CHECK(oracle::rel_err(c.c_of_n, cn) < 1e-10);
            CHECK(oracle::rel_err(c.c2_of_n, c2n) < 1e-10);
        }
        CHECK(c.S_n > 0);
        CHECK(c.c2 > 0);
        CHECK(c.c2bar > 0);
        CHECK(c.c_of_n > 0);
        CHECK(c.c2_of_n > 0);
        CHECK(c.gamma == doctest::Approx((n - 4.0) / (2 * n)));
    }
}

TEST_CASE("constants: independent quadrature schemes agree") {
    for (int n = 4; n <= 6; ++n) {
        const auto a = compute_constants(n, {}, QuadratureScheme::MappedGaussKronrod);
        const auto b = compute_constants(n, {}, QuadratureScheme::ExpSinh);
        CHECK(constants_scheme_disagreement(a, b) < 1e-8);
    }
}

TEST_CASE("constants: dimension three is outside theorem scope") {
    const auto c = compute_constants(3);
    CHECK(c.outside_theorem_scope);
    CHECK(std::isnan(c.c_of_n));
    CHECK(c.S_n > 0);
    CHECK_THROWS_AS(compute_constants(7), DomainError);
    const auto j = to_json(c);
    CHECK(j["c_of_n"].is_null());
}

TEST_CASE("sigma factor") {
    const auto c = compute_constants(4);
    CHECK(c.sigma(2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
    const auto c5 = compute_constants(5);
    const double expected = std::pow(c5.c2bar / c5.c2_of_n, 0.2) * std::pow(c5.c2 / (c5.c_of_n * 3.0), 0.1);
    CHECK(c5.sigma(3.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(c5.sigma(0.0), DomainError);
}
