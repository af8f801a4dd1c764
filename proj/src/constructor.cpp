#include "bubblecluster/constructor.hpp"

#include "bubblecluster/errors.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bubblecluster {

ReducedVariables ReducedVariables::zero(std::size_t N, int n) {
    ReducedVariables r;
    r.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
    r.Lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
    r.zeta.assign(N, Point::Zero(n));
    return r;
}

Eigen::VectorXd ReducedVariables::stacked() const {
    const auto N = static_cast<Eigen::Index>(size());
    const Eigen::Index n = zeta.empty() ? 0 : zeta.front().size();
    Eigen::VectorXd x(2 * N + n * N);
    x.head(N) = beta;
    x.segment(N, N) = Lambda;
    for (Eigen::Index i = 0; i < N; ++i) {
        x.segment(2 * N + i * n, n) = zeta[static_cast<std::size_t>(i)];
    }
    return x;
}

ReducedVariables ReducedVariables::unstack(const Eigen::VectorXd& x, std::size_t N, int n) {
    const auto NN = static_cast<Eigen::Index>(N);
    if (x.size() != 2 * NN + n * NN) {
        throw DomainError("ReducedVariables::unstack: size mismatch");
    }
    ReducedVariables r;
    r.beta = x.head(NN);
    r.Lambda = x.segment(NN, NN);
    for (Eigen::Index i = 0; i < NN; ++i) {
        r.zeta.push_back(x.segment(2 * NN + i * n, n));
    }
    return r;
}

std::string WindowChecks::violation() const {
    std::ostringstream msg;
    if (!alpha_ok) {
        msg << "alpha window: max |alpha_i - 1| = " << max_alpha_dev << " is not below eps ln^2 eps";
    } else if (!lambda_ok) {
        msg << "lambda window: ln^sigma(lambda)/(lambda^2 eps) relative to c2/(c(n) V(b)) spans [" << lambda_ratio_min
            << ", " << lambda_ratio_max << "]";
    } else if (!center_ok) {
        msg << "center window: max |a_i - b - eta sigma zbar_i| / eta = " << max_center_dev
            << " exceeds eta0";
    }
    return msg.str();
}

ClusterState PredictedSolution::state() const {
    ClusterState s;
    s.eps = eps;
    s.alpha = alpha;
    for (std::size_t i = 0; i < size(); ++i) {
        s.bubbles.push_back(BubbleParams{centers[i], lambda[i]});
    }
    return s;
}

double constant_c10(const AsymptoticConstants& c, double V_at_anchor) {
    return c.c2bar / std::pow(c.sigma(V_at_anchor), c.n - 1) *
           std::pow(c.c2 / (c.c_of_n * V_at_anchor), (c.n - 2.0) / 2.0);
}

namespace {

/// Everything the balancing system needs besides the unknowns.
struct Problem {
    const AsymptoticConstants* c = nullptr;
    const PotentialSpec* V = nullptr;
    int n = 0;
    std::size_t N = 0;
    double eps = 0.0;
    double p = 0.0;
    Point b;
    ClusterConfiguration zbar;
    Eigen::MatrixXd H;
    double Vb = 0.0;
    double eta = 0.0;
    double sigma = 0.0;
    double lambda0 = 0.0;  ///< rate at Lambda = 0
    double eta0 = 0.0;
    double window_c = 4.0;
};

double min_pair_distance(const ClusterConfiguration& z) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            d = std::min(d, (z[i] - z[j]).norm());
        }
    }
    return d;
}

void require_anchor(const PotentialSpec& V, const Point& b) {
    for (const auto& a : V.anchors()) {
        if (a.size() == b.size() && (a - b).norm() <= 1e-12 * (1.0 + b.norm())) {
            return;
        }
    }
    throw PreconditionError("b is not a declared anchor of the potential");
}

/// zbar must be a non-degenerate critical point of F for H = D^2 V(b).
void require_certified(const HessianAnchor& anchor, const ClusterConfiguration& zbar) {
    if (zbar.size() < 2) {
        return;
    }
    if (!(min_pair_distance(zbar) > 0.0)) {
        throw PreconditionError("zbar has coincident points");
    }
    const auto g = F_grad(anchor, zbar);
    double gn = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < zbar.size(); ++i) {
        gn += g[i].squaredNorm();
        scale = std::max(scale, zbar[i].norm());
    }
    gn = std::sqrt(gn);
    if (!(gn <= 1e-8 * (1.0 + anchor.H.norm() * scale))) {
        std::ostringstream msg;
        msg << "zbar is not a critical point of F (|grad F| = " << gn << ")";
        throw PreconditionError(msg.str());
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F_hess(anchor, zbar), Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues().cwiseAbs();
    if (!(ev.minCoeff() > 1e-8 * ev.maxCoeff())) {
        throw PreconditionError("zbar is a degenerate critical point of F");
    }
}

Problem make_problem(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                     const ClusterConfiguration& zbar, double eps, const ConstructorSettings& settings) {
    const int n = c.n;
    if (c.outside_theorem_scope || n < 4) {
        throw PreconditionError("the construction requires n >= 4");
    }
    if (V.dim() != n || b.size() != n) {
        throw DomainError("constructor: dimensions of constants, potential and anchor differ");
    }
    if (zbar.empty()) {
        throw DomainError("constructor: zbar is empty");
    }
    for (const auto& z : zbar) {
        if (z.size() != n) {
            throw DomainError("constructor: zbar point of wrong dimension");
        }
    }
    if (!(eps > 0.0 && eps < 1.0)) {
        throw DomainError("constructor: eps must lie in (0, 1)");
    }
    require_anchor(V, b);
    Problem P;
    P.c = &c;
    P.V = &V;
    P.n = n;
    P.N = zbar.size();
    P.eps = eps;
    P.p = critical_exponent(n);
    P.b = b;
    P.zbar = zbar;
    P.H = V.hessian(b);
    require_certified(HessianAnchor{b, P.H}, zbar);
    P.Vb = V.value(b);
    if (!(P.Vb > 0.0)) {
        throw PreconditionError("V(b) must be positive");
    }
    P.eta = eta_of_eps(n, eps);
    P.sigma = c.sigma(P.Vb);
    const double logfac = std::pow(std::abs(std::log(eps)) / 2.0, c.sigma_n);
    P.lambda0 = std::sqrt(c.c_of_n * P.Vb * logfac / (c.c2 * eps));
    P.eta0 = settings.eta0 >= 0.0 ? settings.eta0 : (P.N >= 2 ? 0.25 * min_pair_distance(zbar) : 0.25);
    P.window_c = settings.window_c;
    return P;
}

template <typename T>
T potential_value(const PotentialSpec& V, const Eigen::Matrix<T, Eigen::Dynamic, 1>& x) {
    using std::pow;
    T v = T(0.0);
    for (const auto& m : V.monomials()) {
        T t = T(m.coef);
        for (int k = 0; k < V.dim(); ++k) {
            for (int e = 0; e < m.powers[k]; ++e) {
                t = t * x[k];
            }
        }
        v += t;
    }
    for (const auto& r : V.radial_terms()) {
        T rho = T(0.0);
        for (int k = 0; k < V.dim(); ++k) {
            const T d = x[k] - r.center[k];
            rho += d * d;
        }
        T pw = T(1.0);
        for (double coef : r.coefs) {
            v += coef * pw;
            pw = pw * rho;
        }
    }
    return v;
}

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// The stacked residual; T is double or an AutoDiff scalar.
template <typename T>
Vec<T> residual_t(const Problem& P, const Vec<T>& x) {
    using std::log;
    using std::pow;
    using std::sqrt;
    const int n = P.n;
    const auto N = static_cast<Eigen::Index>(P.N);
    const AsymptoticConstants& c = *P.c;
    const double eps = P.eps;
    const double p = P.p;
    const double shrink_exp = -eps * (n - 2.0) / 2.0;

    std::vector<T> alpha(P.N), lambda(P.N);
    std::vector<Vec<T>> a(P.N);
    for (Eigen::Index i = 0; i < N; ++i) {
        alpha[i] = pow(T(1.0) - x[i], 1.0 / (p - 1.0));
        lambda[i] = P.lambda0 / sqrt(T(1.0) + x[N + i]);
        a[i] = Vec<T>(n);
        for (int k = 0; k < n; ++k) {
            a[i][k] = P.b[k] + P.eta * P.sigma * (x[2 * N + i * n + k] + P.zbar[i][k]);
        }
    }

    Vec<T> r(2 * N + n * N);
    for (Eigen::Index i = 0; i < N; ++i) {
        // alpha-block
        const T shrink_i = pow(lambda[i], shrink_exp);
        r[i] = T(1.0) - pow(alpha[i], p - 1.0 - eps) * shrink_i;

        // lambda-block
        T interaction = T(0.0);
        for (Eigen::Index j = 0; j < N; ++j) {
            if (j == i) {
                continue;
            }
            T d2 = T(0.0);
            for (int k = 0; k < n; ++k) {
                const T d = a[i][k] - a[j][k];
                d2 += d * d;
            }
            const T Q = lambda[i] / lambda[j] + lambda[j] / lambda[i] + lambda[i] * lambda[j] * d2;
            const T lQ = lambda[i] / lambda[j] - lambda[j] / lambda[i] + lambda[i] * lambda[j] * d2;
            const T d_lambda = -(n - 2.0) / 2.0 * pow(Q, -n / 2.0) * lQ;
            const T bracket = T(1.0) - pow(alpha[i], p - 1.0 - eps) * shrink_i -
                              pow(alpha[j], p - 1.0 - eps) * pow(lambda[j], shrink_exp);
            interaction += alpha[j] * c.c2bar * d_lambda * bracket;
        }
        const double c0e = std::pow(c.c0, -eps);
        const T eps_term = c0e * shrink_i * c.c2 * pow(alpha[i], p - eps) * eps;
        const T shape = (c.sigma_n == 1 ? log(lambda[i]) : T(1.0)) / (lambda[i] * lambda[i]);
        const T potential_term = c.c_of_n * alpha[i] * shape * potential_value<T>(*P.V, a[i]) *
                                 (2.0 * pow(alpha[i], p - eps - 1.0) * c0e * shrink_i - 1.0);
        r[N + i] = (interaction + eps_term - potential_term) / (c.c2 * eps);

        // zeta-block
        Vec<T> zi(n);
        for (int k = 0; k < n; ++k) {
            zi[k] = x[2 * N + i * n + k];
        }
        Vec<T> out = P.H.cast<T>() * zi;
        for (Eigen::Index j = 0; j < N; ++j) {
            if (j == i) {
                continue;
            }
            const Point zji = P.zbar[j] - P.zbar[i];
            const double dist = zji.norm();
            const double inv_n = std::pow(dist, -n);
            Vec<T> dz(n);
            for (int k = 0; k < n; ++k) {
                dz[k] = x[2 * N + j * n + k] - zi[k];
            }
            T proj = T(0.0);
            for (int k = 0; k < n; ++k) {
                proj += zji[k] / (dist * dist) * dz[k];
            }
            const T coupling = (n - 6.0) / 4.0 * x[N + i] + (n - 2.0) / 4.0 * x[N + j];
            for (int k = 0; k < n; ++k) {
                out[k] += -(n - 2.0) * dz[k] * inv_n + n * (n - 2.0) * proj * zji[k] * inv_n -
                          (n - 2.0) * zji[k] * inv_n * coupling;
            }
        }
        for (int k = 0; k < n; ++k) {
            r[2 * N + i * n + k] = out[k];
        }
    }
    return r;
}

WindowChecks check_windows(const Problem& P, const std::vector<double>& alpha, const std::vector<double>& lambda,
                           const std::vector<Point>& centers) {
    WindowChecks w;
    const double le = std::log(P.eps);
    const double alpha_window = P.eps * le * le;
    const double target = P.c->c2 / (P.c->c_of_n * P.Vb);
    w.lambda_ratio_min = std::numeric_limits<double>::infinity();
    w.lambda_ratio_max = 0.0;
    for (std::size_t i = 0; i < P.N; ++i) {
        w.max_alpha_dev = std::max(w.max_alpha_dev, std::abs(alpha[i] - 1.0));
        const double r =
            std::pow(std::log(lambda[i]), P.c->sigma_n) / (lambda[i] * lambda[i] * P.eps) / target;
        w.lambda_ratio_min = std::min(w.lambda_ratio_min, r);
        w.lambda_ratio_max = std::max(w.lambda_ratio_max, r);
        const Point dev = centers[i] - P.b - P.eta * P.sigma * P.zbar[i];
        w.max_center_dev = std::max(w.max_center_dev, dev.norm() / P.eta);
    }
    w.alpha_ok = w.max_alpha_dev < alpha_window;
    w.lambda_ok = w.lambda_ratio_min > 1.0 / P.window_c && w.lambda_ratio_max < P.window_c;
    w.center_ok = w.max_center_dev <= P.eta0;
    return w;
}

PredictedSolution build_prediction(const Problem& P, const ReducedVariables& r, const ConstructorSettings& settings) {
    if (r.size() != P.N || r.zeta.size() != P.N) {
        throw DomainError("reduced variables do not match the cluster size");
    }
    PredictedSolution s;
    s.eps = P.eps;
    s.b = P.b;
    s.zbar = P.zbar;
    s.eta = P.eta;
    s.sigma = P.sigma;
    s.eta0 = P.eta0;
    for (std::size_t i = 0; i < P.N; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (!(r.beta[k] < 1.0) || !(r.Lambda[k] > -1.0)) {
            throw PreconditionError("reduced variables outside their domain (beta < 1, Lambda > -1)");
        }
        s.alpha.push_back(std::pow(1.0 - r.beta[k], 1.0 / (P.p - 1.0)));
        s.lambda.push_back(P.lambda0 / std::sqrt(1.0 + r.Lambda[k]));
        s.centers.push_back(P.b + P.eta * P.sigma * (r.zeta[i] + P.zbar[i]));
    }
    s.windows = check_windows(P, s.alpha, s.lambda, s.centers);
    double d0 = settings.d0;
    if (settings.grid != nullptr && d0 < 0.0) {
        d0 = 0.1 * settings.grid->min_half_width();
    }
    s.membership = membership_violation(s.state(), settings.mu, settings.grid, d0);
    return s;
}

void require_windows(const Problem& P, const ReducedVariables& r, const ConstructorSettings& settings) {
    const auto pred = build_prediction(P, r, settings);
    if (!pred.windows.all()) {
        throw PreconditionError("state outside the windows: " + pred.windows.violation());
    }
}

} // namespace

PredictedSolution parameters_from_reduced(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                          const ClusterConfiguration& zbar, double eps,
                                          const ReducedVariables& r, const ConstructorSettings& settings) {
    const Problem P = make_problem(c, V, b, zbar, eps, settings);
    return build_prediction(P, r, settings);
}

PredictedSolution predicted_parameters(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                       const ClusterConfiguration& zbar, double eps,
                                       const ConstructorSettings& settings) {
    const Problem P = make_problem(c, V, b, zbar, eps, settings);
    auto s = build_prediction(P, ReducedVariables::zero(P.N, P.n), settings);
    if (!s.membership.empty()) {
        throw PreconditionError("predicted parameters outside O(N, mu): " + s.membership);
    }
    return s;
}

Eigen::VectorXd balancing_residual(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                   const ClusterConfiguration& zbar, double eps, const ReducedVariables& r,
                                   const ConstructorSettings& settings) {
    const Problem P = make_problem(c, V, b, zbar, eps, settings);
    require_windows(P, r, settings);
    return residual_t<double>(P, r.stacked());
}

namespace {

Eigen::MatrixXd jacobian_of(const Problem& P, const Eigen::VectorXd& x) {
    using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
    const Eigen::Index m = x.size();
    Vec<AD> xa(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        xa[k] = AD(x[k], m, k);
    }
    const Vec<AD> ra = residual_t<AD>(P, xa);
    Eigen::MatrixXd J(ra.size(), m);
    for (Eigen::Index r = 0; r < ra.size(); ++r) {
        if (ra[r].derivatives().size() == 0) {
            J.row(r).setZero();
        } else {
            J.row(r) = ra[r].derivatives().transpose();
        }
    }
    return J;
}

} // namespace

Eigen::MatrixXd balancing_jacobian(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                   const ClusterConfiguration& zbar, double eps, const ReducedVariables& r,
                                   const ConstructorSettings& settings) {
    const Problem P = make_problem(c, V, b, zbar, eps, settings);
    require_windows(P, r, settings);
    return jacobian_of(P, r.stacked());
}

BalancingSolution solve_balancing(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                  const ClusterConfiguration& zbar, double eps, const BalancingSettings& settings) {
    const Problem P = make_problem(c, V, b, zbar, eps, settings.constructor);
    const std::size_t N = P.N;
    const int n = P.n;
    auto in_windows = [&](const Eigen::VectorXd& x) {
        const auto r = ReducedVariables::unstack(x, N, n);
        for (Eigen::Index i = 0; i < r.beta.size(); ++i) {
            if (!(r.beta[i] < 1.0) || !(r.Lambda[i] > -1.0)) {
                return false;
            }
        }
        return build_prediction(P, r, settings.constructor).windows.all();
    };

    Eigen::VectorXd x = ReducedVariables::zero(N, n).stacked();
    if (!in_windows(x)) {
        throw PreconditionError("the zero state lies outside the windows");
    }
    Eigen::VectorXd r = residual_t<double>(P, x);
    double rn = r.lpNorm<Eigen::Infinity>();
    int it = 0;
    while (rn > settings.tol) {
        if (it >= settings.max_iter) {
            throw ConvergenceError("solve_balancing: iteration limit reached", 0.0, rn);
        }
        ++it;
        const Eigen::MatrixXd J = jacobian_of(P, x);
        const Eigen::VectorXd dx = J.fullPivLu().solve(-r);
        if (!dx.allFinite()) {
            throw ConvergenceError("solve_balancing: singular Jacobian", 0.0, rn);
        }
        double t = 1.0;
        bool accepted = false;
        bool any_inside = false;
        for (int k = 0; k < 40; ++k, t *= 0.5) {
            const Eigen::VectorXd trial = x + t * dx;
            if (!in_windows(trial)) {
                continue;
            }
            any_inside = true;
            const Eigen::VectorXd rt = residual_t<double>(P, trial);
            const double rtn = rt.lpNorm<Eigen::Infinity>();
            if (rtn <= (1.0 - 1e-4 * t) * rn || rtn <= settings.tol) {
                x = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!any_inside) {
                throw PreconditionError("solve_balancing: the Newton step leaves the windows");
            }
            throw ConvergenceError("solve_balancing: line search stalled", 0.0, rn);
        }
    }

    BalancingSolution out;
    out.vars = ReducedVariables::unstack(x, N, n);
    out.predicted = build_prediction(P, out.vars, settings.constructor);
    out.iterations = it;
    out.residual_norm = rn;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian_of(P, x));
    const auto& sv = svd.singularValues();
    out.jacobian_min_singular = sv[sv.size() - 1];
    out.jacobian_condition = sv[0] / sv[sv.size() - 1];
    return out;
}

GridField assemble_approx_solution(const DiscreteOperator& op, const PredictedSolution& pred,
                                   const ProjectionSettings& settings, double mu) {
    const ClusterState s = pred.state();
    const double d0 = settings.d0 >= 0.0 ? settings.d0 : 0.1 * op.grid().min_half_width();
    require_membership(s, mu, &op.grid(), d0);
    GridField u = GridField::Zero(op.grid().active_count());
    for (std::size_t i = 0; i < s.size(); ++i) {
        u += s.alpha[i] * project_bubble(op, s.bubbles[i], settings).pi_delta;
    }
    return u;
}

double approx_residual_l2(const DiscreteOperator& op, const GridField& u, double eps) {
    const int n = op.grid().dim();
    const double q = critical_exponent(n) - eps;
    GridField r = op.apply(u);
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        r[k] -= std::pow(std::max(u[k], 0.0), q);
    }
    return std::sqrt(r.squaredNorm() * op.grid().cell_volume());
}

MultiBlockPrediction multi_block_predict(const AsymptoticConstants& c, const PotentialSpec& V,
                                         const std::vector<BlockSpec>& blocks, double eps,
                                         const ConstructorSettings& settings, double cross_threshold,
                                         double min_anchor_separation) {
    if (blocks.empty()) {
        throw DomainError("multi_block_predict: no blocks");
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        for (std::size_t l = k + 1; l < blocks.size(); ++l) {
            if (!((blocks[k].b - blocks[l].b).norm() > min_anchor_separation)) {
                throw PreconditionError("multi_block_predict: anchors are not separated");
            }
        }
    }
    MultiBlockPrediction out;
    for (const auto& blk : blocks) {
        out.blocks.push_back(predicted_parameters(c, V, blk.b, blk.zbar, eps, settings));
    }
    for (std::size_t k = 0; k < out.blocks.size(); ++k) {
        for (std::size_t l = k + 1; l < out.blocks.size(); ++l) {
            const auto& A = out.blocks[k];
            const auto& B = out.blocks[l];
            for (std::size_t i = 0; i < A.size(); ++i) {
                for (std::size_t j = 0; j < B.size(); ++j) {
                    const double e = epsilon_ij(BubbleParams{A.centers[i], A.lambda[i]},
                                                BubbleParams{B.centers[j], B.lambda[j]}).eps;
                    out.max_cross_interaction = std::max(out.max_cross_interaction, e);
                }
            }
        }
    }
    out.within_scale = eps;
    out.ratio = out.max_cross_interaction / out.within_scale;
    out.negligible = out.ratio < cross_threshold;
    if (out.negligible) {
        out.status = "ok";
    } else {
        std::ostringstream msg;
        msg << "warning: cross-block interaction " << out.max_cross_interaction << " is " << out.ratio
            << " times eps (threshold " << cross_threshold << ")";
        out.status = msg.str();
    }
    return out;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json points_json(const std::vector<Point>& pts) {
    auto out = nlohmann::json::array();
    for (const auto& p : pts) {
        out.push_back(to_vec(p));
    }
    return out;
}

} // namespace

nlohmann::json to_json(const ReducedVariables& r) {
    return {{"beta", to_vec(r.beta)}, {"Lambda", to_vec(r.Lambda)}, {"zeta", points_json(r.zeta)}};
}

nlohmann::json to_json(const WindowChecks& w) {
    return {{"alpha_ok", w.alpha_ok},
            {"lambda_ok", w.lambda_ok},
            {"center_ok", w.center_ok},
            {"max_alpha_dev", w.max_alpha_dev},
            {"lambda_ratio_min", w.lambda_ratio_min},
            {"lambda_ratio_max", w.lambda_ratio_max},
            {"max_center_dev", w.max_center_dev}};
}

nlohmann::json to_json(const PredictedSolution& p) {
    return {{"eps", p.eps},
            {"b", to_vec(p.b)},
            {"zbar", points_json(p.zbar)},
            {"alpha", p.alpha},
            {"lambda", p.lambda},
            {"centers", points_json(p.centers)},
            {"eta", p.eta},
            {"sigma", p.sigma},
            {"eta0", p.eta0},
            {"windows", to_json(p.windows)},
            {"in_O_N_mu", p.membership.empty()},
            {"membership", p.membership}};
}

nlohmann::json to_json(const BalancingSolution& s) {
    return {{"reduced", to_json(s.vars)},
            {"predicted", to_json(s.predicted)},
            {"iterations", s.iterations},
            {"residual_norm", s.residual_norm},
            {"jacobian_min_singular", s.jacobian_min_singular},
            {"jacobian_condition", s.jacobian_condition}};
}

nlohmann::json to_json(const MultiBlockPrediction& m) {
    auto blocks = nlohmann::json::array();
    for (const auto& b : m.blocks) {
        blocks.push_back(to_json(b));
    }
    return {{"blocks", blocks},
            {"max_cross_interaction", m.max_cross_interaction},
            {"within_scale", m.within_scale},
            {"ratio", m.ratio},
            {"negligible", m.negligible},
            {"status", m.status}};
}

} // namespace bubblecluster
