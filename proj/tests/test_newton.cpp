#include "bubblecluster/errors.hpp"
#include "bubblecluster/newton.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace bubblecluster;

namespace {

const AsymptoticConstants& constants(int n) {
    static const AsymptoticConstants c4 = compute_constants(4);
    static const AsymptoticConstants c5 = compute_constants(5);
    return n == 4 ? c4 : c5;
}

GridField sampled_bubbles(const DomainGrid& grid, const std::vector<BubbleParams>& bs,
                          const std::vector<double>& weights) {
    return sample(grid, [&](const Point& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < bs.size(); ++i) {
            s += weights[i] * bubble_eval(bs[i], x);
        }
        return s;
    });
}

BubbleParams make_bubble(const Point& a, double lambda) {
    BubbleParams b;
    b.center = a;
    b.lambda = lambda;
    return b;
}

/// V = 2 - x_1^2 + (x_2^2 + ... + x_4^2)/2 in dimension four.
PotentialSpec cluster_potential() {
    auto V = PotentialSpec::parse_polynomial(4, "2:0000, -1:2000, 0.5:0200, 0.5:0020, 0.5:0002");
    V.add_anchor(Point::Zero(4));
    return V;
}

/// Critical pair of F for cluster_potential: +-(1/8)^{1/4} e_1.
ClusterConfiguration cluster_pair() {
    ClusterConfiguration z(2, Point::Zero(4));
    z[0][0] = std::pow(0.125, 0.25);
    z[1][0] = -z[0][0];
    return z;
}

NewtonSettings wide_newton() {
    NewtonSettings s;
    s.mu = 0.5;
    return s;
}

} // namespace

TEST_CASE("extract_peaks recovers a sampled bubble") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 0.5, 33));
    const double h = grid.spacing()[0];
    Point a(n);
    a << 0.013, -0.02, 0.007, 0.0011;
    const double lambda = 0.25 / h;
    for (double weight : {1.0, 1.3}) {
        const auto u = sampled_bubbles(grid, {make_bubble(a, lambda)}, {weight});
        const auto peaks = extract_peaks(grid, u, 2 * h);
        REQUIRE(peaks.size() == 1);
        const auto& pk = peaks[0];
        CHECK(pk.refined);
        CHECK((pk.center - a).norm() < h);
        CHECK((pk.center - a).norm() < 1e-10);
        CHECK(pk.lambda_curv == doctest::Approx(lambda).epsilon(1e-10));
        CHECK(pk.alpha_hat == doctest::Approx(weight).epsilon(1e-10));
        CHECK(pk.height == doctest::Approx(weight * bubble_c0(n) * lambda).epsilon(1e-10));
        if (weight == 1.0) {
            CHECK(oracle::rel_err(pk.lambda_hat, lambda) < 0.05);
        }
    }
}

TEST_CASE("extract_peaks: empty field, sign check, separated bubbles, translation") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 0.5, 25));
    const double h = grid.spacing()[0];
    CHECK(extract_peaks(grid, GridField::Zero(grid.active_count()), h).empty());
    GridField neg = GridField::Zero(grid.active_count());
    neg[5] = -1.0;
    CHECK_THROWS_AS(extract_peaks(grid, neg, h), DomainError);

    Point a1 = Point::Zero(n);
    Point a2 = Point::Zero(n);
    a1[0] = -0.2;
    a2[0] = 0.22;
    a2[2] = 0.05;
    const auto u = sampled_bubbles(grid, {make_bubble(a1, 6.0), make_bubble(a2, 5.0)}, {1.0, 1.0});
    const auto two = extract_peaks(grid, u, 2 * h);
    REQUIRE(two.size() == 2);
    CHECK(two[0].height >= two[1].height);
    // the sum of two bubbles is not a bubble, only close to one near each peak
    CHECK((two[0].center - a1).norm() < 0.5 * h);
    CHECK((two[1].center - a2).norm() < 0.5 * h);
    // merging: a radius beyond the separation keeps the higher peak only
    CHECK(extract_peaks(grid, u, 1.0).size() == 1);

    Point b = Point::Zero(n);
    b[1] = 0.011;
    const auto base = extract_peaks(grid, sampled_bubbles(grid, {make_bubble(b, 6.0)}, {1.0}), 2 * h);
    Point shifted = b;
    shifted[0] += 3 * h;
    shifted[3] -= 2 * h;
    const auto moved = extract_peaks(grid, sampled_bubbles(grid, {make_bubble(shifted, 6.0)}, {1.0}), 2 * h);
    REQUIRE(base.size() == 1);
    REQUIRE(moved.size() == 1);
    Point expect = base[0].center;
    expect[0] += 3 * h;
    expect[3] -= 2 * h;
    CHECK((moved[0].center - expect).norm() < 1e-12);
}

TEST_CASE("newton_solve recovers a manufactured solution") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 1.0, 13));
    const auto V = PotentialSpec::constant(n, 1.0);
    const DiscreteOperator op(grid, V);
    const double eps = 0.05;
    const double q = critical_exponent(n) - eps;
    const GridField target = sample(grid, [](const Point& x) {
        double s = 2.0;
        for (int a = 0; a < x.size(); ++a) {
            s *= std::cos(0.5 * std::numbers::pi * x[a]);
        }
        return s;
    });
    const GridField forcing = op.apply(target) - target.unaryExpr([q](double v) { return std::pow(v, q); });
    const auto rep = newton_solve(op, eps, 0.8 * target, wide_newton(), &forcing);
    REQUIRE(rep.ok());
    CHECK(rep.residual <= 1e-9);
    CHECK((rep.u - target).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(rep.iterations <= 8);
}

TEST_CASE("newton_solve: trivial branch and input checks") {
    const int n = 4;
    const auto grid = build_grid(cube_spec(n, 1.0, 9));
    const DiscreteOperator op(grid, PotentialSpec::constant(n, 1.0));
    const auto rep = newton_solve(op, 0.05, GridField::Zero(grid.active_count()));
    CHECK(rep.status == SolveStatus::Trivial);
    CHECK_FALSE(rep.positive);
    CHECK(rep.iterations == 0);
    CHECK_FALSE(rep.ok());

    // a small start falls into the basin of zero
    const auto small = newton_solve(op, 0.05, GridField::Constant(grid.active_count(), 0.1));
    CHECK(small.status == SolveStatus::Trivial);

    CHECK_THROWS_AS(newton_solve(op, 0.2, GridField::Zero(grid.active_count())), DomainError);
    CHECK_THROWS_AS(newton_solve(op, -0.01, GridField::Zero(grid.active_count())), DomainError);
    GridField bad = GridField::Zero(grid.active_count());
    bad[0] = std::nan("");
    CHECK_THROWS_AS(newton_solve(op, 0.05, bad), DomainError);

    NewtonSettings one;
    one.max_iter = 1;
    one.tol = 1e-300;
    const auto capped = newton_solve(op, 0.05, GridField::Constant(grid.active_count(), 3.0), one);
    CHECK(capped.status == SolveStatus::MaxIter);
    CHECK(to_string(SolveStatus::LostPositivity) == "lost_positivity");
}

TEST_CASE("two-bubble solution from the approximate solution") {
    const int n = 4;
    const auto& c = constants(n);
    const auto V = cluster_potential();
    const auto grid = build_grid(cube_spec(n, 1.0, 17));
    const DiscreteOperator op(grid, V);
    ConstructorSettings cs;
    cs.mu = 0.5;
    const double eps = 0.2;
    const auto pred = predicted_parameters(c, V, Point::Zero(n), cluster_pair(), eps, cs);
    ProjectionSettings ps;
    ps.max_lambda_h = 2.0;
    const auto u0 = assemble_approx_solution(op, pred, ps, 0.5);
    const auto rep = newton_solve(op, eps, u0, wide_newton());
    REQUIRE(rep.ok());
    CHECK(rep.iterations <= 12);
    CHECK(rep.positive);
    CHECK(rep.residual <= wide_newton().tol);
    REQUIRE(rep.peaks.size() == 2);
    CHECK(rep.peaks[0].center[0] * rep.peaks[1].center[0] < 0.0);

    // quadratic convergence over the last two steps
    const auto& r = rep.residual_history;
    REQUIRE(r.size() >= 3);
    for (std::size_t k = r.size() - 2; k < r.size(); ++k) {
        CHECK(r[k] / (r[k - 1] * r[k - 1]) < 1e3);
    }

    // criticality witness: the gradient pairs to zero with every basis field
    ProjectionSettings wide_proj;
    wide_proj.max_lambda_h = 10.0;
    wide_proj.d0 = 0.05;
    const double G = (op.apply(rep.u) - rep.u.cwiseMax(0.0).array().pow(critical_exponent(n) - eps).matrix())
                         .lpNorm<Eigen::Infinity>();
    for (const auto& pk : rep.peaks) {
        const auto fields = basis_fields(op, make_bubble(pk.center, pk.lambda_curv), wide_proj);
        for (const auto& phi : fields) {
            const double l1 = phi.cwiseAbs().sum() * grid.cell_volume();
            CHECK(std::abs(gradient_pairing(op, eps, rep.u, phi)) <= 10.0 * G * l1 + 1e-12 * norm(op, phi));
        }
    }
}

TEST_CASE("continuation_sweep: schedule checks, grid cap and partial tables") {
    const int n = 4;
    const auto& c = constants(n);
    const auto V = cluster_potential();
    const auto grid = build_grid(cube_spec(n, 1.0, 17));
    const DiscreteOperator op(grid, V);
    ConstructorSettings cs;
    cs.mu = 0.5;
    const auto pred = predicted_parameters(c, V, Point::Zero(n), cluster_pair(), 0.2, cs);
    SweepSettings ss;
    ss.newton = wide_newton();
    ss.projection.max_lambda_h = 2.0;
    ss.max_lambda_h = 2.5;

    CHECK_THROWS_AS(continuation_sweep(op, c, pred, {}, ss), DomainError);
    CHECK_THROWS_AS(continuation_sweep(op, c, pred, {0.1, 0.2}, ss), DomainError);
    CHECK_THROWS_AS(continuation_sweep(op, c, pred, {0.2, 0.2}, ss), DomainError);

    // predicted lambda h at eps = 0.2, 0.1, 0.05, 0.02 is 0.87, 1.47, 2.37, 4.4 with h = 1/8
    const auto t = continuation_sweep(op, c, pred, {0.2, 0.1, 0.05, 0.02}, ss);
    CHECK_FALSE(t.complete);
    CHECK(t.stop_reason.find("grid cap at eps = 0.02") != std::string::npos);
    CHECK(t.eps_done == std::vector<double>{0.2, 0.1, 0.05});
    REQUIRE(t.rows.size() == 6);
    for (const auto& row : t.rows) {
        CHECK(row.lambda_hat > 0.0);
        CHECK(row.residual <= ss.newton.tol);
        CHECK(row.a_hat[0] * (row.index == 0 ? 1.0 : -1.0) > 0.0);
    }

    // the discrete solutions on this grid concentrate at the lattice scale,
    // which the default cap reports as unresolved
    const auto strict = continuation_sweep(op, c, pred, {0.2, 0.1}, SweepSettings{ss.newton, ss.projection});
    CHECK(strict.rows.empty());
    CHECK(strict.stop_reason.find("unresolved at eps = 0.2") != std::string::npos);

    std::ostringstream a;
    std::ostringstream b;
    write_sweep_csv(a, t, "abc123");
    write_sweep_csv(b, t, "abc123");
    CHECK(a.str() == b.str());
    std::istringstream lines(a.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "eps,block,i,lambda_hat,lambda_curv,a_hat_1,a_hat_2,a_hat_3,a_hat_4,alpha_hat,height,residual,"
                    "iterations,config_hash");
    std::string first;
    std::getline(lines, first);
    CHECK(first.substr(first.size() - 7) == ",abc123");
}

TEST_CASE("fit_scaling_law on constructor predictions") {
    SUBCASE("n = 5") {
        const int n = 5;
        auto V = PotentialSpec::parse_polynomial(n, "2:00000, -0.5:20000, 0.5:02000, 0.5:00200, 0.5:00020, 0.5:00002");
        V.add_anchor(Point::Zero(n));
        ClusterConfiguration z(2, Point::Zero(n));
        z[0][0] = std::pow(3.0 / 16.0, 0.2);
        z[1][0] = -z[0][0];
        const auto t = analytic_sweep(constants(n), V, Point::Zero(n), z, {1e-2, 5e-3, 2e-3, 1e-3, 1e-4});
        REQUIRE(t.complete);
        const auto fit = fit_scaling_law(t);
        REQUIRE(fit.fits.size() == 2);
        for (const auto& f : fit.fits) {
            CHECK(std::abs(f.lambda.slope + 0.5) < 1e-12);
            CHECK(f.lambda.half_width < 1e-10);
            REQUIRE(f.center.has_value());
            CHECK(std::abs(f.center->slope - 1.0) < 1e-12);
        }
    }
    SUBCASE("n = 4") {
        const auto t = analytic_sweep(constants(4), cluster_potential(), Point::Zero(4), cluster_pair(),
                                      {0.1, 0.05, 0.02, 0.01});
        const auto fit = fit_scaling_law(t);
        for (const auto& f : fit.fits) {
            CHECK(std::abs(f.lambda.slope + 0.5) < 1e-10);
            CHECK(std::abs(f.center->slope - 1.0) < 1e-10);
        }
    }
    SUBCASE("balancing solutions drift from the leading law but stay close") {
        ConstructorSettings cs;
        cs.mu = 0.5;
        const auto t = analytic_sweep(constants(4), cluster_potential(), Point::Zero(4), cluster_pair(),
                                      {0.1, 0.05, 0.02}, true, cs);
        REQUIRE(t.complete);
        const auto fit = fit_scaling_law(t);
        CHECK(std::abs(fit.fits[0].lambda.slope + 0.5) < 0.1);
    }
}

TEST_CASE("fit_line and degenerate inputs") {
    const auto f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.1, 4.9, 7.0});
    CHECK(f.slope == doctest::Approx(1.98));
    CHECK(f.intercept == doctest::Approx(1.03));
    // residuals 0.0 0.17 -0.06 0.06 ... checked against a direct evaluation
    double ssr = 0.0;
    const double xs[] = {0.0, 1.0, 2.0, 3.0};
    const double ys[] = {1.0, 3.1, 4.9, 7.0};
    for (int k = 0; k < 4; ++k) {
        ssr += std::pow(ys[k] - f.intercept - f.slope * xs[k], 2);
    }
    const double t975_2 = 4.302652729911275;  // Student t quantile with 2 degrees of freedom
    CHECK(f.half_width == doctest::Approx(t975_2 * std::sqrt(ssr / 2.0 / 5.0)).epsilon(1e-9));

    CHECK_THROWS_AS(fit_line({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), DomainError);
    CHECK_THROWS_AS(fit_line({1.0, 2.0, 3.0}, {4.0, 4.0, 4.0}), DomainError);
    CHECK_THROWS_AS(fit_line({1.0, 2.0}, {1.0, 2.0}), DomainError);

    SweepTable t;
    t.n = 5;
    t.b = Point::Zero(5);
    for (double eps : {0.1, 0.01}) {
        SweepRow r;
        r.eps = eps;
        r.lambda_hat = 1.0 / std::sqrt(eps);
        r.a_hat = Point::Ones(5);
        t.rows.push_back(r);
    }
    CHECK_THROWS_AS(fit_scaling_law(t), DomainError);
    CHECK_THROWS_AS(fit_scaling_law(SweepTable{}), DomainError);
}
