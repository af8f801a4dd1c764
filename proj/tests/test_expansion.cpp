#include "bubblecluster/errors.hpp"
#include "bubblecluster/expansion.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace bubblecluster;

namespace {

const AsymptoticConstants& constants(int n) {
    static const AsymptoticConstants c4 = compute_constants(4);
    static const AsymptoticConstants c5 = compute_constants(5);
    static const AsymptoticConstants c6 = compute_constants(6);
    return n == 4 ? c4 : (n == 5 ? c5 : c6);
}

BubbleParams bubble(int n, double lambda, double x0 = 0.0) {
    BubbleParams b;
    b.center = Point::Zero(n);
    b.center[0] = x0;
    b.lambda = lambda;
    return b;
}

ClusterState single(int n, double lambda, double eps, double alpha = 1.0) {
    ClusterState s;
    s.eps = eps;
    s.alpha = {alpha};
    s.bubbles = {bubble(n, lambda)};
    return s;
}

ClusterState pair(int n, double l1, double l2, double sep, double eps, double a1 = 1.0, double a2 = 1.0) {
    ClusterState s;
    s.eps = eps;
    s.alpha = {a1, a2};
    s.bubbles = {bubble(n, l1, -sep / 2.0), bubble(n, l2, sep / 2.0)};
    s.bubbles[1].center[1] = 0.1 * sep;
    return s;
}

/// Interaction derivative written out from the closed form of eps_ij.
Point s22_derivative(const BubbleParams& bi, const BubbleParams& bj) {
    const int n = bi.dim();
    const double d2 = (bi.center - bj.center).squaredNorm();
    const double Q = bi.lambda / bj.lambda + bj.lambda / bi.lambda + bi.lambda * bj.lambda * d2;
    const double e = std::pow(Q, -(n - 2.0) / 2.0);
    return (n - 2.0) * bi.lambda * bj.lambda * (bj.center - bi.center) * std::pow(e, n / (n - 2.0));
}

} // namespace

TEST_CASE("alpha pairing vanishes at the balancing weight") {
    for (int n : {4, 5, 6}) {
        const auto& c = constants(n);
        const double p = critical_exponent(n);
        for (double eps : {0.01, 0.05}) {
            for (double lam : {5.0, 20.0}) {
                const double alpha = std::pow(lam, eps * (n - 2.0) / (2.0 * (p - 1.0 - eps)));
                CHECK(std::abs(predict_alpha_pairing(c, alpha, lam, eps)) < 1e-12 * c.S_n);
            }
        }
        CHECK(predict_alpha_pairing(c, 1.0, 7.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("alpha pairing direct and factored forms agree") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 50; ++k) {
        const int n = 4 + k % 3;
        const auto& c = constants(n);
        const double p = critical_exponent(n);
        const double alpha = oracle::uniform(rng, 0.9, 1.1);
        const double lam = oracle::uniform(rng, 10.0, 100.0);
        const double eps = oracle::uniform(rng, 0.0, 0.05);
        const double direct = alpha * c.S_n - c.S_n * std::exp((p - eps) * std::log(alpha) -
                                                               eps * (n - 2.0) / 2.0 * std::log(lam));
        CHECK(std::abs(predict_alpha_pairing(c, alpha, lam, eps) - direct) < 1e-13 * c.S_n);
    }
}

TEST_CASE("lambda pairing is balanced on the lambda law") {
    for (int n : {4, 5, 6}) {
        const auto& c = constants(n);
        const auto V = PotentialSpec::constant(n, 1.5);
        for (double lam : {20.0, 50.0}) {
            const double shape = std::pow(std::log(lam), c.sigma_n) / (lam * lam);
            const double eps = c.c_of_n * 1.5 * shape / c.c2;
            const double pred = predict_lambda_pairing(c, single(n, lam, eps), V, 0);
            // What is left is c2 eps (1 - c0^-eps lambda^{-eps(n-2)/2}) = O(eps^2 ln lambda).
            const double leftover = c.c2 * eps * (1.0 - std::pow(c.c0, -eps) * std::pow(lam, -eps * (n - 2.0) / 2.0));
            CHECK(oracle::rel_err(pred, leftover) < 1e-10);
            CHECK(std::abs(pred) < 2.0 * c.c2 * eps * eps * std::log(c.c0 * lam));
        }
    }
}

TEST_CASE("lambda pairing sign flips once across the balance point") {
    const int n = 5;
    const auto& c = constants(n);
    const auto V = PotentialSpec::constant(n, 1.0);
    const double eps = 0.02;
    auto f = [&](double lam) { return predict_lambda_pairing(c, single(n, lam, eps), V, 0); };
    int changes = 0;
    double prev = f(2.0);
    double root_lo = 0.0;
    for (double lam = 2.0; lam <= 400.0; lam *= 1.01) {
        const double cur = f(lam);
        if ((cur > 0.0) != (prev > 0.0)) {
            ++changes;
            root_lo = lam;
        }
        prev = cur;
    }
    CHECK(changes == 1);
    CHECK(f(root_lo / 2.0) < 0.0);
    CHECK(f(root_lo * 2.0) > 0.0);
}

TEST_CASE("lambda pairing interaction term for far-apart bubbles") {
    const int n = 5;
    const auto& c = constants(n);
    const auto V = PotentialSpec::constant(n, 1.0);
    for (double sep : {0.5, 1.0, 2.0}) {
        const auto s2 = pair(n, 30.0, 30.0, sep, 0.0);
        auto s1 = s2;
        s1.alpha.resize(1);
        s1.bubbles.resize(1);
        const double term = predict_lambda_pairing(c, s2, V, 0) - predict_lambda_pairing(c, s1, V, 0);
        const auto e = epsilon_ij(s2.bubbles[0], s2.bubbles[1]);
        CHECK(e.d_lambda_i < 0.0);
        CHECK(term > 0.0);
        CHECK(term <= c.c2bar * (n - 2.0) / 2.0 * e.eps * (1.0 + 1e-12));
    }
}

TEST_CASE("point pairing limiting cases and the closed-form interaction derivative") {
    for (int n : {4, 5, 6}) {
        const auto& c = constants(n);
        auto V = PotentialSpec::parse_polynomial(n, "1:" + std::string(n, '0'));
        V.add_radial(RadialTerm{Point::Zero(n), {0.0, 0.3}});

        const auto zero = predict_point_pairing(c, single(n, 25.0, 0.01), V, 0);
        CHECK(zero.norm() == 0.0);

        // gradient term off: constant potential
        const auto Vc = PotentialSpec::constant(n, 2.0);
        const auto s = pair(n, 20.0, 25.0, 0.6, 0.01, 1.01, 0.98);
        const Point v = predict_point_pairing(c, s, Vc, 0);
        const Point dir = s.bubbles[1].center - s.bubbles[0].center;
        CHECK(std::abs(v.normalized().dot(dir.normalized())) == doctest::Approx(1.0).epsilon(1e-12));

        // full expression against an independent assembly
        const double p = critical_exponent(n);
        const double eps = s.eps;
        const double l0 = s.bubbles[0].lambda;
        const double shrink = std::pow(c.c0, -eps) * std::pow(l0, -eps * (n - 2.0) / 2.0);
        const Point grad = 0.6 * s.bubbles[0].center;  // grad of 0.3 |x|^2
        Point expect = c.c2_of_n * s.alpha[0] * std::pow(std::log(l0), c.sigma_n) / std::pow(l0, 3) * grad *
                       (2.0 * std::pow(s.alpha[0], p - eps - 1.0) * shrink - 1.0);
        expect += c.c2bar * s.alpha[1] / l0 * s22_derivative(s.bubbles[0], s.bubbles[1]) *
                  (1.0 - shrink * std::pow(s.alpha[0], p - eps - 1.0) - shrink * std::pow(s.alpha[1], p - eps - 1.0));
        const Point got = predict_point_pairing(c, s, V, 0);
        CHECK((got - expect).norm() <= 1e-10 * expect.norm());
    }
}

TEST_CASE("remainder shapes are monotone and non-negative") {
    for (int n : {3, 4, 5, 6}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double lam = 2.0; lam < 1e4; lam *= 1.3) {
            const double t2 = remainder_T2(n, lam);
            CHECK(t2 > 0.0);
            if (n != 4 || lam > std::exp(0.5)) {
                CHECK(t2 < prev);
            }
            prev = t2;
        }
        double prev3 = 0.0;
        for (double t = 1e-8; t < std::exp(-1.0); t *= 1.2) {
            const double t3 = remainder_T3(n, t);
            CHECK(t3 > prev3);
            prev3 = t3;
        }
        // the clamp keeps T3 continuous and non-decreasing past e^-1
        CHECK(remainder_T3(n, 0.5) >= remainder_T3(n, std::exp(-1.0)));
    }
    CHECK_THROWS_AS(remainder_T2(4, 0.5), DomainError);
    CHECK_THROWS_AS(remainder_T3(6, -1.0), DomainError);
}

TEST_CASE("budgets at v = 0 and for a pair") {
    const auto s = single(4, 12.0, 0.03);
    const auto b = remainder_budget(s, 0);
    CHECK(b.R_alpha == doctest::Approx(0.03 + std::log(12.0) / 144.0).epsilon(1e-14));
    CHECK(b.T3 == 0.0);
    CHECK(b.Xi_12 == 0.0);
    CHECK(remainder_budget(s, 0, 0.25).R_alpha == doctest::Approx(b.R_alpha + 0.25));

    const auto sp = pair(5, 20.0, 30.0, 0.5, 0.01);
    const auto bp = remainder_budget(sp, 0);
    const double e = state_interaction(sp, 0, 1);
    CHECK(bp.T3 == doctest::Approx(e));
    CHECK(bp.R_alpha == doctest::Approx(0.01 + 1.0 / 400.0 + e));
    for (double v : {bp.T2, bp.T3, bp.R_alpha, bp.R_lambda, bp.R_a, bp.R_v, bp.Xi_12}) {
        CHECK(v > 0.0);
    }
}

TEST_CASE("membership names the violated condition") {
    CHECK(membership_violation(single(4, 20.0, 0.001), 0.1).empty());
    CHECK(membership_violation(single(4, 5.0, 0.001), 0.1).find("lambda_0") != std::string::npos);
    CHECK(membership_violation(single(4, 20.0, 0.05), 0.1).find("eps ln lambda") != std::string::npos);
    CHECK(membership_violation(single(4, 20.0, 0.001, 1.2), 0.1).find("alpha") != std::string::npos);
    // coincident bubbles: eps_12 = 1/2
    ClusterState s = pair(4, 20.0, 20.0, 0.0, 0.001);
    s.bubbles[1].center = s.bubbles[0].center;
    CHECK(membership_violation(s, 0.1).find("eps_01") != std::string::npos);
    CHECK_THROWS_AS(require_membership(s, 0.1), PreconditionError);

    const auto grid = build_grid(cube_spec(4, 0.5, 5));
    ClusterState edge = single(4, 20.0, 0.001);
    edge.bubbles[0].center[0] = 0.45;
    CHECK(membership_violation(edge, 0.1, &grid, 0.05).find("boundary") != std::string::npos);
}

TEST_CASE("verify_expansion report identities on a coarse grid") {
    const int n = 4;
    const auto& c = constants(n);
    const auto grid = build_grid(cube_spec(n, 0.5, 17));
    const auto V = PotentialSpec::parse_polynomial(n, "1:0000,0.5:2000");
    const DiscreteOperator op(grid, V);
    ExpansionSettings es;
    es.mu = 0.5;
    const auto s = single(n, 4.0, 0.05);
    const auto reports = verify_expansions(op, c, s, es);
    REQUIRE(reports.size() == 3);
    for (const auto& r : reports) {
        CHECK((r.remainder - (r.numeric - r.predicted)).norm() == 0.0);
        CHECK(r.ratio == doctest::Approx(r.remainder.norm() / r.budget_value).epsilon(1e-15));
    }
    CHECK(reports[0].kind == ExpansionKind::Alpha);
    CHECK(reports[0].budget_value == doctest::Approx(0.05 + std::log(4.0) / 16.0));
    CHECK(reports[2].numeric.size() == n);

    const auto alone = verify_expansion(op, c, s, ExpansionKind::Lambda, 0, es);
    CHECK(alone.numeric[0] == doctest::Approx(reports[1].numeric[0]).epsilon(1e-12));

    auto sharp = single(n, 40.0, 0.001);
    CHECK_THROWS_AS(verify_expansion(op, c, sharp, ExpansionKind::Alpha, 0, es), ResolutionRefusal);
    CHECK_THROWS_AS(verify_expansion(op, c, single(n, 4.0, 0.05), ExpansionKind::Alpha, 0), PreconditionError);
    CHECK(expansion_kind_from_string("point") == ExpansionKind::Point);
    CHECK_THROWS_AS(expansion_kind_from_string("rho"), DomainError);
}

TEST_CASE("power audit rejects equal exponents and large interactions") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 0.5, 17));
    const auto b1 = bubble(n, 8.0, -0.25);
    const auto b2 = bubble(n, 8.0, 0.25);
    CHECK_THROWS_AS(audit_power_interaction(grid, b1, b2, 2.0, 2.0, 0.1), PreconditionError);
    CHECK_THROWS_AS(audit_power_interaction(grid, b1, b2, 3.0, 2.0, 0.1), PreconditionError);
    CHECK_THROWS_AS(audit_power_interaction(grid, b1, b1, 3.0, 1.0, 0.1), PreconditionError);
    const auto row = audit_power_interaction(grid, b1, b2, 3.0, 1.0, 0.1);
    CHECK(row.ratio > 0.0);
    CHECK(row.rhs == doctest::Approx(epsilon_ij(b1, b2).eps));

    // translation by whole grid cells changes the ratio only through the truncation
    const double h = grid.spacing()[0];
    auto t1 = b1;
    auto t2 = b2;
    t1.center[1] += 2 * h;
    t2.center[1] += 2 * h;
    const auto moved = audit_power_interaction(grid, t1, t2, 3.0, 1.0, 0.1);
    CHECK(oracle::rel_err(moved.ratio, row.ratio) < 2e-2);

    AuditSettings as;
    as.exponents = {{2.0, 2.0}};
    as.families = {"power"};
    const DiscreteOperator op(grid, PotentialSpec::constant(n, 1.0));
    CHECK_THROWS_AS(audit_appendix(op, constants(n), {AuditSample{b1, b2}}, as), PreconditionError);
}

TEST_CASE("audit table ordering does not depend on the thread count") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 0.5, 13));
    const DiscreteOperator op(grid, PotentialSpec::constant(n, 1.0));
    std::vector<AuditSample> samples;
    for (double lam : {6.0, 8.0}) {
        for (double sep : {0.5, 0.6}) {
            samples.push_back({bubble(n, lam, -sep / 2), bubble(n, lam, sep / 2)});
        }
    }
    AuditSettings as;
    as.families = {"power"};
    as.threads = 1;
    const auto serial = audit_appendix(op, constants(n), samples, as);
    as.threads = 3;
    const auto parallel = audit_appendix(op, constants(n), samples, as);
    REQUIRE(serial.rows.size() == 8);
    REQUIRE(parallel.rows.size() == serial.rows.size());
    for (std::size_t k = 0; k < serial.rows.size(); ++k) {
        CHECK(serial.rows[k].quantity == parallel.rows[k].quantity);
        CHECK(serial.rows[k].ratio == parallel.rows[k].ratio);
    }
    REQUIRE(serial.summaries.size() == 2);
    CHECK(serial.summaries[0].samples == 4);
    CHECK(serial.summaries[0].spread() >= 1.0);
}
