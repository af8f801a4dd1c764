#include "bubblecluster/expansion.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace bubblecluster {

void ClusterState::validate() const {
    if (bubbles.empty()) {
        throw DomainError("cluster state has no bubbles");
    }
    if (alpha.size() != bubbles.size()) {
        throw DomainError("cluster state: alpha and bubbles differ in length");
    }
    const int n = dim();
    for (std::size_t i = 0; i < bubbles.size(); ++i) {
        bubbles[i].validate();
        if (bubbles[i].dim() != n) {
            throw DomainError("cluster state: bubbles of different dimensions");
        }
        if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
            throw DomainError("cluster state: alpha must be positive and finite");
        }
    }
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
        throw DomainError("cluster state: eps must be non-negative");
    }
}

double state_interaction(const ClusterState& s, std::size_t i, std::size_t j) {
    return epsilon_ij(s.bubbles[i], s.bubbles[j]).eps;
}

std::string membership_violation(const ClusterState& s, double mu, const DomainGrid* grid, double d0) {
    s.validate();
    std::ostringstream msg;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(std::abs(s.alpha[i] - 1.0) < mu)) {
            msg << "|alpha_" << i << " - 1| = " << std::abs(s.alpha[i] - 1.0) << " is not below mu = " << mu;
            return msg.str();
        }
        const double lam = s.bubbles[i].lambda;
        if (!(lam > 1.0 / mu)) {
            msg << "lambda_" << i << " = " << lam << " is not above 1/mu = " << 1.0 / mu;
            return msg.str();
        }
        if (!(s.eps * std::log(lam) < mu)) {
            msg << "eps ln lambda_" << i << " = " << s.eps * std::log(lam) << " is not below mu = " << mu;
            return msg.str();
        }
        if (grid != nullptr) {
            const double dist = grid->distance_to_boundary(s.bubbles[i].center);
            if (!(dist > 2.0 * d0)) {
                msg << "d(a_" << i << ", boundary) = " << dist << " is not above 2 d0 = " << 2.0 * d0;
                return msg.str();
            }
        }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const double e = state_interaction(s, i, j);
            if (!(e < mu)) {
                msg << "eps_" << i << j << " = " << e << " is not below mu = " << mu;
                return msg.str();
            }
        }
    }
    return {};
}

void require_membership(const ClusterState& s, double mu, const DomainGrid* grid, double d0) {
    const auto why = membership_violation(s, mu, grid, d0);
    if (!why.empty()) {
        throw PreconditionError("state outside O(N, mu): " + why);
    }
}

double remainder_T2(int n, double lambda) {
    if (!(lambda > 1.0)) {
        throw DomainError("remainder_T2: lambda must exceed 1");
    }
    if (n == 3) {
        return 1.0 / lambda;
    }
    if (n == 4) {
        return std::log(lambda) / (lambda * lambda);
    }
    return 1.0 / (lambda * lambda);
}

double remainder_T3(int n, double t) {
    if (!(t >= 0.0)) {
        throw DomainError("remainder_T3: t must be non-negative");
    }
    if (n <= 5 || t == 0.0) {
        return n <= 5 ? t : 0.0;
    }
    const double log_term = -std::log(std::min(t, std::exp(-1.0)));
    return std::pow(t, (n + 2.0) / (2.0 * (n - 2.0))) * std::pow(log_term, (n + 2.0) / (2.0 * n));
}

double remainder_Xi(int n, const BubbleParams& b1, const BubbleParams& b2) {
    const double l1 = b1.lambda;
    const double l2 = b2.lambda;
    const double d = (b1.center - b2.center).norm();
    if (n == 3) {
        return 1.0 / l1;
    }
    if (n == 4) {
        const double dlog = d > 0.0 ? d * d * std::abs(std::log(d)) : 0.0;
        return std::log(l1) / (l1 * l1) + dlog + std::pow(l2, -1.5);
    }
    return 1.0 / (l1 * l1) + d * d + std::pow(l2, -1.5);
}

RemainderBudget remainder_budget(const ClusterState& s, std::size_t i, double v_norm2) {
    s.validate();
    if (i >= s.size()) {
        throw DomainError("remainder_budget: bubble index out of range");
    }
    const int n = s.dim();
    const double li = s.bubbles[i].lambda;
    const double eps = s.eps;
    RemainderBudget b;
    b.T2 = remainder_T2(n, li);

    double sum_eps_i = 0.0;      // sum_{j != i} eps_ij
    double sum_T3_all = 0.0;     // sum_{k != j} T3(eps_kj)
    double sum_log_all = 0.0;    // sum_{k != j} eps_kj^{n/(n-2)} ln(1/eps_kj)
    double lambda_cross = 0.0;   // sum_{j != i} (lambda_i lambda_j)^{-(n-2)/2} + eps_ij (Xi_ij + ...)
    double point_cross = 0.0;    // sum_{j != i} lambda_j |a_i - a_j| eps_ij^{(n+1)/(n-2)} + eps_ij (eps + ...)
    double sum_T2_all = 0.0;
    double sum_lk = 0.0;         // sum_k lambda_k^{-(n-1)}
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double lk = s.bubbles[k].lambda;
        sum_T2_all += remainder_T2(n, lk);
        sum_lk += std::pow(lk, -(n - 1.0));
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j == k) {
                continue;
            }
            const double e = state_interaction(s, k, j);
            sum_T3_all += remainder_T3(n, e);
            if (e > 0.0) {
                sum_log_all += std::pow(e, n / (n - 2.0)) * std::log(1.0 / e);
            }
        }
    }
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (j == i) {
            continue;
        }
        const double lj = s.bubbles[j].lambda;
        const double e = state_interaction(s, i, j);
        const double xi = remainder_Xi(n, s.bubbles[i], s.bubbles[j]);
        const double dist = (s.bubbles[i].center - s.bubbles[j].center).norm();
        sum_eps_i += e;
        b.T3 += remainder_T3(n, e);
        b.Xi_12 += xi;
        lambda_cross += std::pow(li * lj, -(n - 2.0) / 2.0) + e * (xi + std::pow(lj, -1.5) + std::pow(li, -1.5));
        point_cross += lj * dist * std::pow(e, (n + 1.0) / (n - 2.0)) + e * (eps + 1.0 / li + std::pow(lj, -1.5));
    }
    const double sigma = log_power(n);
    const double log_li = std::pow(std::log(li), sigma);

    b.R_alpha = eps + b.T2 + v_norm2 + sum_eps_i;
    b.R_lambda = eps * eps + v_norm2 + std::pow(li, -(n - 2.0)) + std::pow(li, -4.0) + sum_log_all + lambda_cross;
    if (n == 6) {
        b.R_lambda += std::log(li) / std::pow(li, 4.0);
    }
    b.R_a = v_norm2 + std::pow(li, -4.0) + sum_lk + sum_log_all + point_cross + eps * log_li / (li * li);
    if (n == 5) {
        b.R_a += std::log(li) / std::pow(li, 4.0);
    }
    b.R_v = eps + sum_T2_all + sum_T3_all;
    return b;
}

double predict_alpha_pairing(const AsymptoticConstants& c, double alpha, double lambda, double eps) {
    const int n = c.n;
    const double p = critical_exponent(n);
    return alpha * c.S_n * (1.0 - std::pow(alpha, p - 1.0 - eps) * std::pow(lambda, -eps * (n - 2.0) / 2.0));
}

namespace {

void check_prediction_inputs(const AsymptoticConstants& c, const ClusterState& s, const PotentialSpec& V,
                             std::size_t i) {
    s.validate();
    if (s.dim() != c.n || V.dim() != c.n) {
        throw DomainError("prediction: dimensions of constants, state and potential differ");
    }
    if (i >= s.size()) {
        throw DomainError("prediction: bubble index out of range");
    }
}

} // namespace

double predict_lambda_pairing(const AsymptoticConstants& c, const ClusterState& s, const PotentialSpec& V,
                              std::size_t i) {
    check_prediction_inputs(c, s, V, i);
    const int n = c.n;
    const double p = critical_exponent(n);
    const double eps = s.eps;
    const double ai = s.alpha[i];
    const double li = s.bubbles[i].lambda;
    const double shrink_i = std::pow(li, -eps * (n - 2.0) / 2.0);
    const double c0e = std::pow(c.c0, -eps);

    double interaction = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (j == i) {
            continue;
        }
        const double aj = s.alpha[j];
        const double lj = s.bubbles[j].lambda;
        const auto e = epsilon_ij(s.bubbles[i], s.bubbles[j]);
        const double bracket = 1.0 - std::pow(ai, p - 1.0 - eps) * shrink_i -
                               std::pow(aj, p - 1.0 - eps) * std::pow(lj, -eps * (n - 2.0) / 2.0);
        interaction += aj * c.c2bar * e.d_lambda_i * bracket;
    }
    const double eps_term = c0e * shrink_i * c.c2 * std::pow(ai, p - eps) * eps;
    const double shape = std::pow(std::log(li), c.sigma_n) / (li * li);
    const double potential_term = c.c_of_n * ai * shape * V.value(s.bubbles[i].center) *
                                  (2.0 * std::pow(ai, p - eps - 1.0) * c0e * shrink_i - 1.0);
    return interaction + eps_term - potential_term;
}

Eigen::VectorXd predict_point_pairing(const AsymptoticConstants& c, const ClusterState& s, const PotentialSpec& V,
                                      std::size_t i) {
    check_prediction_inputs(c, s, V, i);
    const int n = c.n;
    const double p = critical_exponent(n);
    const double eps = s.eps;
    const double ai = s.alpha[i];
    const double li = s.bubbles[i].lambda;
    const double c0e_shrink = std::pow(c.c0, -eps) * std::pow(li, -eps * (n - 2.0) / 2.0);

    const double shape = std::pow(std::log(li), c.sigma_n) / (li * li * li);
    Eigen::VectorXd out = c.c2_of_n * ai * shape * (2.0 * std::pow(ai, p - eps - 1.0) * c0e_shrink - 1.0) *
                          V.gradient(s.bubbles[i].center);
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (j == i) {
            continue;
        }
        const double aj = s.alpha[j];
        const auto e = epsilon_ij(s.bubbles[i], s.bubbles[j]);
        const double bracket =
            1.0 - c0e_shrink * std::pow(ai, p - eps - 1.0) - c0e_shrink * std::pow(aj, p - eps - 1.0);
        out += c.c2bar * aj * bracket * e.d_a_i;
    }
    return out;
}

std::string to_string(ExpansionKind k) {
    switch (k) {
    case ExpansionKind::Alpha:
        return "alpha";
    case ExpansionKind::Lambda:
        return "lambda";
    case ExpansionKind::Point:
        return "point";
    }
    return "alpha";
}

ExpansionKind expansion_kind_from_string(const std::string& s) {
    if (s == "alpha") {
        return ExpansionKind::Alpha;
    }
    if (s == "lambda") {
        return ExpansionKind::Lambda;
    }
    if (s == "point") {
        return ExpansionKind::Point;
    }
    throw DomainError("unknown expansion kind '" + s + "'");
}

namespace {

struct SharedSum {
    std::vector<GridField> pi_delta;
    GridField ubar;
};

SharedSum build_sum(const DiscreteOperator& op, const ClusterState& s, const ProjectionSettings& settings) {
    SharedSum out;
    out.ubar = GridField::Zero(op.grid().active_count());
    for (std::size_t k = 0; k < s.size(); ++k) {
        out.pi_delta.push_back(project_bubble(op, s.bubbles[k], settings).pi_delta);
        out.ubar += s.alpha[k] * out.pi_delta.back();
    }
    return out;
}

ExpansionReport make_report(const DiscreteOperator& op, const AsymptoticConstants& c, const ClusterState& s,
                            const SharedSum& sum, ExpansionKind kind, std::size_t i,
                            const ExpansionSettings& settings) {
    const int n = s.dim();
    ExpansionReport r;
    r.kind = kind;
    r.index = i;
    r.budget = remainder_budget(s, i);
    switch (kind) {
    case ExpansionKind::Alpha:
        r.numeric = Eigen::VectorXd::Constant(1, gradient_pairing(op, s.eps, sum.ubar, sum.pi_delta[i]));
        r.predicted =
            Eigen::VectorXd::Constant(1, predict_alpha_pairing(c, s.alpha[i], s.bubbles[i].lambda, s.eps));
        r.budget_value = r.budget.R_alpha;
        break;
    case ExpansionKind::Lambda: {
        const GridField phi = basis_field(op, s.bubbles[i], 1, settings.projection);
        r.numeric = Eigen::VectorXd::Constant(1, gradient_pairing(op, s.eps, sum.ubar, phi));
        r.predicted = Eigen::VectorXd::Constant(1, predict_lambda_pairing(c, s, op.potential_spec(), i));
        r.budget_value = r.budget.R_lambda;
        break;
    }
    case ExpansionKind::Point: {
        r.numeric.resize(n);
        for (int j = 0; j < n; ++j) {
            const GridField phi = basis_field(op, s.bubbles[i], 2 + j, settings.projection);
            r.numeric[j] = gradient_pairing(op, s.eps, sum.ubar, phi);
        }
        r.predicted = predict_point_pairing(c, s, op.potential_spec(), i);
        r.budget_value = r.budget.R_a;
        break;
    }
    }
    r.remainder = r.numeric - r.predicted;
    r.ratio = r.remainder.norm() / r.budget_value;
    return r;
}

void check_expansion_inputs(const DiscreteOperator& op, const AsymptoticConstants& c, const ClusterState& s,
                            const ExpansionSettings& settings) {
    s.validate();
    if (s.dim() != op.grid().dim() || c.n != s.dim()) {
        throw DomainError("verify_expansion: dimensions of grid, constants and state differ");
    }
    if (c.outside_theorem_scope) {
        throw PreconditionError("verify_expansion: the expansions require n >= 4");
    }
    const double d0 = settings.projection.d0 >= 0.0 ? settings.projection.d0 : 0.1 * op.grid().min_half_width();
    require_membership(s, settings.mu, &op.grid(), d0);
}

} // namespace

ExpansionReport verify_expansion(const DiscreteOperator& op, const AsymptoticConstants& c, const ClusterState& s,
                                 ExpansionKind kind, std::size_t i, const ExpansionSettings& settings) {
    check_expansion_inputs(op, c, s, settings);
    if (i >= s.size()) {
        throw DomainError("verify_expansion: bubble index out of range");
    }
    const SharedSum sum = build_sum(op, s, settings.projection);
    return make_report(op, c, s, sum, kind, i, settings);
}

std::vector<ExpansionReport> verify_expansions(const DiscreteOperator& op, const AsymptoticConstants& c,
                                               const ClusterState& s, const ExpansionSettings& settings) {
    check_expansion_inputs(op, c, s, settings);
    const SharedSum sum = build_sum(op, s, settings.projection);
    std::vector<ExpansionReport> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (auto kind : {ExpansionKind::Alpha, ExpansionKind::Lambda, ExpansionKind::Point}) {
            out.push_back(make_report(op, c, s, sum, kind, i, settings));
        }
    }
    return out;
}

nlohmann::json to_json(const RemainderBudget& b) {
    return {{"T2", b.T2},           {"T3", b.T3}, {"R_alpha", b.R_alpha}, {"R_lambda", b.R_lambda},
            {"R_a", b.R_a},         {"R_v", b.R_v}, {"Xi_12", b.Xi_12}};
}

nlohmann::json to_json(const ExpansionReport& r) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"kind", to_string(r.kind)},  {"index", r.index},          {"numeric", vec(r.numeric)},
            {"predicted", vec(r.predicted)}, {"remainder", vec(r.remainder)}, {"budget", to_json(r.budget)},
            {"budget_value", r.budget_value}, {"ratio", r.ratio}};
}

// ---------------------------------------------------------------------------

namespace {

void require_small_interaction(const BubbleParams& b1, const BubbleParams& b2, double mu, const char* who) {
    const double e = epsilon_ij(b1, b2).eps;
    if (!(e < mu)) {
        std::ostringstream msg;
        msg << who << ": eps_12 = " << e << " is not below mu = " << mu;
        throw PreconditionError(msg.str());
    }
}

AuditRow pair_row(const char* family, const char* quantity, const BubbleParams& b1, const BubbleParams& b2,
                  double lhs, double rhs) {
    AuditRow r;
    r.family = family;
    r.quantity = quantity;
    r.lambda_1 = b1.lambda;
    r.lambda_2 = b2.lambda;
    r.separation = (b1.center - b2.center).norm();
    r.lhs = lhs;
    r.rhs = rhs;
    r.ratio = lhs / rhs;
    return r;
}

} // namespace

AuditRow audit_power_interaction(const DomainGrid& grid, const BubbleParams& b1, const BubbleParams& b2,
                                 double a_exp, double b_exp, double mu) {
    const int n = grid.dim();
    if (b1.dim() != n || b2.dim() != n) {
        throw DomainError("audit_power_interaction: dimension mismatch");
    }
    if (a_exp == b_exp) {
        throw PreconditionError("audit_power_interaction: the exponents must differ");
    }
    if (std::abs(a_exp + b_exp - 2.0 * n / (n - 2.0)) > 1e-12) {
        throw PreconditionError("audit_power_interaction: the exponents must sum to 2n/(n-2)");
    }
    if (!(a_exp > 0.0) || !(b_exp > 0.0)) {
        throw PreconditionError("audit_power_interaction: the exponents must be positive");
    }
    require_small_interaction(b1, b2, mu, "audit_power_interaction");
    double sum = 0.0;
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        const Point x = grid.coords(k);
        sum += std::pow(bubble_eval(b1, x), a_exp) * std::pow(bubble_eval(b2, x), b_exp);
    }
    const double lhs = sum * grid.cell_volume();
    const double rhs = std::pow(epsilon_ij(b1, b2).eps, std::min(a_exp, b_exp));
    std::ostringstream q;
    q << "int d1^" << a_exp << " d2^" << b_exp;
    AuditRow r = pair_row("power", "", b1, b2, lhs, rhs);
    r.quantity = q.str();
    return r;
}

std::vector<AuditRow> audit_single_projection(const DiscreteOperator& op, const AsymptoticConstants& c,
                                              const BubbleParams& b, const ProjectionSettings& settings) {
    const int n = op.grid().dim();
    if (c.n != n) {
        throw DomainError("audit_single_projection: dimension mismatch");
    }
    const auto basis = basis_fields(op, b, settings);
    const double lam = b.lambda;
    const double lg = std::pow(std::log(lam), c.sigma_n);
    auto row = [&](const char* quantity, double lhs, double rhs) {
        AuditRow r;
        r.family = "projection";
        r.quantity = quantity;
        r.lambda_1 = lam;
        r.lhs = lhs;
        r.rhs = rhs;
        r.ratio = lhs / rhs;
        return r;
    };
    std::vector<AuditRow> out;
    out.push_back(row("|pi d|^2 - S_n", std::abs(inner_product(op, basis[0], basis[0]) - c.S_n), lg / (lam * lam)));
    out.push_back(row("<pi d, l d_l pi d>", std::abs(inner_product(op, basis[0], basis[1])), lg / (lam * lam)));
    double point = 0.0;
    for (int j = 0; j < n; ++j) {
        const double v = inner_product(op, basis[0], basis[2 + j]);
        point += v * v;
    }
    out.push_back(row("<pi d, l^-1 d_a pi d>", std::sqrt(point), lg / (lam * lam * lam)));
    return out;
}

AuditRow audit_projection_cross(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                double mu, const ProjectionSettings& settings) {
    require_small_interaction(b1, b2, mu, "audit_projection_cross");
    const GridField p1 = project_bubble(op, b1, settings).pi_delta;
    const GridField p2 = project_bubble(op, b2, settings).pi_delta;
    return pair_row("projection", "<pi d1, pi d2>", b1, b2, std::abs(inner_product(op, p1, p2)),
                    epsilon_ij(b1, b2).eps);
}

AuditRow audit_defect_interaction(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                  double mu, const ProjectionSettings& settings) {
    require_small_interaction(b1, b2, mu, "audit_defect_interaction");
    const int n = op.grid().dim();
    const double p = critical_exponent(n);
    const auto proj = project_bubble(op, b1, settings);
    const DomainGrid& grid = op.grid();
    double sum = 0.0;
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        sum += std::pow(bubble_eval(b2, grid.coords(k)), p) * std::abs(proj.theta[k]);
    }
    const double lhs = sum * grid.cell_volume();
    const double rhs = std::pow(b1.lambda * b2.lambda, -(n - 2.0) / 2.0) +
                       epsilon_ij(b1, b2).eps * remainder_Xi(n, b1, b2);
    return pair_row("defect", "int d2^p |theta1|", b1, b2, lhs, rhs);
}

AuditRow audit_orthogonal_coupling(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                   double eps, double mu, const ProjectionSettings& settings) {
    require_small_interaction(b1, b2, mu, "audit_orthogonal_coupling");
    const DomainGrid& grid = op.grid();
    const int n = grid.dim();
    const double p = critical_exponent(n);

    std::vector<GridField> basis = basis_fields(op, b1, settings);
    const auto basis2 = basis_fields(op, b2, settings);
    basis.insert(basis.end(), basis2.begin(), basis2.end());

    // Smooth field vanishing on the box boundary with no symmetry that
    // would make it orthogonal to the basis by accident.
    GridField v = sample(grid, [&](const Point& x) {
        double prod = 1.0;
        for (int a = 0; a < n; ++a) {
            const double t = (x[a] - grid.lower()[a]) / (grid.upper()[a] - grid.lower()[a]);
            prod *= std::sin(std::numbers::pi * t);
        }
        const double t0 = (x[0] - grid.lower()[0]) / (grid.upper()[0] - grid.lower()[0]);
        return prod * (1.0 + t0);
    });
    const auto m = basis.size();
    Eigen::MatrixXd G(m, m);
    Eigen::VectorXd rhs(m);
    for (std::size_t r = 0; r < m; ++r) {
        rhs[r] = inner_product(op, basis[r], v);
        for (std::size_t q = r; q < m; ++q) {
            G(r, q) = G(q, r) = inner_product(op, basis[r], basis[q]);
        }
    }
    const Eigen::VectorXd coef = G.completeOrthogonalDecomposition().solve(rhs);
    for (std::size_t r = 0; r < m; ++r) {
        v -= coef[r] * basis[r];
    }
    const double vnorm = norm(op, v);

    const GridField u = basis[0] + basis[n + 2];
    double sum = 0.0;
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        sum += std::pow(std::abs(u[k]), p - eps - 1.0) * v[k] * basis[0][k];
    }
    const double lhs = std::abs(sum * grid.cell_volume()) / vnorm;
    const double bound = eps + remainder_T2(n, b1.lambda) + remainder_T3(n, epsilon_ij(b1, b2).eps);
    return pair_row("orthogonal", "|int u^(p-1-eps) v phi1| / |v|", b1, b2, lhs, bound);
}

std::vector<AuditSummary> summarize(const std::vector<AuditRow>& rows) {
    std::vector<AuditSummary> out;
    std::map<std::pair<std::string, std::string>, std::size_t> slot;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.family, r.quantity);
        auto it = slot.find(key);
        if (it == slot.end()) {
            AuditSummary s;
            s.family = r.family;
            s.quantity = r.quantity;
            s.max_ratio = r.ratio;
            s.min_ratio = r.ratio;
            s.samples = 1;
            slot.emplace(key, out.size());
            out.push_back(s);
            continue;
        }
        auto& s = out[it->second];
        s.max_ratio = std::max(s.max_ratio, r.ratio);
        s.min_ratio = std::min(s.min_ratio, r.ratio);
        ++s.samples;
    }
    return out;
}

AuditTable audit_appendix(const DiscreteOperator& op, const AsymptoticConstants& c,
                          const std::vector<AuditSample>& samples, const AuditSettings& settings) {
    const int n = op.grid().dim();
    auto exponents = settings.exponents;
    if (exponents.empty()) {
        const double half = n / (n - 2.0);
        exponents = {{critical_exponent(n), 1.0}, {half + 0.5, half - 0.5}};
    }
    for (const auto& [a, b] : exponents) {
        if (a == b) {
            throw PreconditionError("audit_appendix: power rows need distinct exponents");
        }
    }

    auto wanted = [&](const char* family) {
        return std::find(settings.families.begin(), settings.families.end(), family) != settings.families.end();
    };
    std::vector<std::vector<AuditRow>> per_sample(samples.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < samples.size(); k = next++) {
            try {
                const auto& s = samples[k];
                auto& rows = per_sample[k];
                if (!s.second) {
                    if (wanted("projection")) {
                        rows = audit_single_projection(op, c, s.first, settings.projection);
                    }
                    continue;
                }
                if (wanted("power")) {
                    for (const auto& [a, b] : exponents) {
                        rows.push_back(audit_power_interaction(op.grid(), s.first, *s.second, a, b, settings.mu));
                    }
                }
                if (wanted("orthogonal")) {
                    rows.push_back(audit_orthogonal_coupling(op, s.first, *s.second, settings.eps, settings.mu,
                                                             settings.projection));
                }
                if (wanted("defect")) {
                    rows.push_back(audit_defect_interaction(op, s.first, *s.second, settings.mu, settings.projection));
                }
                if (wanted("projection")) {
                    rows.push_back(audit_projection_cross(op, s.first, *s.second, settings.mu, settings.projection));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const int threads = std::max(1, settings.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    AuditTable table;
    for (auto& rows : per_sample) {
        table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    }
    table.summaries = summarize(table.rows);
    return table;
}

nlohmann::json to_json(const AuditRow& r) {
    return {{"family", r.family}, {"quantity", r.quantity}, {"lambda_1", r.lambda_1}, {"lambda_2", r.lambda_2},
            {"separation", r.separation}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}};
}

nlohmann::json to_json(const AuditSummary& s) {
    return {{"family", s.family},       {"quantity", s.quantity}, {"max_ratio", s.max_ratio},
            {"min_ratio", s.min_ratio}, {"samples", s.samples},  {"spread", s.spread()}};
}

} // namespace bubblecluster
