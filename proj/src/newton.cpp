#include "bubblecluster/newton.hpp"

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/errors.hpp"

#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bubblecluster {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Jacobi preconditioner built from the diagonal of -Delta_h + V rather
/// than from the (possibly negative) diagonal of the Jacobian, so that it
/// stays positive definite as MINRES requires.
class OperatorDiagonal : public Eigen::DiagonalPreconditioner<double> {
public:
    OperatorDiagonal() = default;
    template <typename M>
    explicit OperatorDiagonal(const M&) {}

    void set_inverse(const Eigen::VectorXd& inv) {
        m_invdiag = inv;
        m_isInitialized = true;
    }
    template <typename M>
    OperatorDiagonal& analyzePattern(const M&) {
        return *this;
    }
    template <typename M>
    OperatorDiagonal& factorize(const M&) {
        return *this;
    }
    template <typename M>
    OperatorDiagonal& compute(const M&) {
        return *this;
    }
};

double positive_power(double v, double e) { return v > 0.0 ? std::pow(v, e) : 0.0; }

GridField nonlinearity(const GridField& u, double q) {
    return u.unaryExpr([q](double v) { return positive_power(v, q); });
}

GridField residual_field(const DiscreteOperator& op, double eps, const GridField& u, const GridField* forcing) {
    const double q = critical_exponent(op.grid().dim()) - eps;
    GridField g = op.apply(u) - nonlinearity(u, q);
    if (forcing != nullptr) {
        g -= *forcing;
    }
    return g;
}

double scaled_residual(const GridField& g, const GridField& u, double q) {
    double nl = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        nl = std::max(nl, positive_power(u[k], q));
    }
    return g.lpNorm<Eigen::Infinity>() / std::max(1.0, nl);
}

SparseMatrix assemble_jacobian(const DiscreteOperator& op, double eps, const GridField& u) {
    const auto& g = op.grid();
    const int n = g.dim();
    const double q = critical_exponent(n) - eps;
    const std::int32_t m = g.active_count();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * (2 * n + 1));
    for (std::int32_t k = 0; k < m; ++k) {
        trip.emplace_back(k, k, op.diagonal()[k] - q * positive_power(u[k], q - 1.0));
        for (int a = 0; a < n; ++a) {
            const double w = -1.0 / (g.spacing()[a] * g.spacing()[a]);
            for (int dir : {-1, 1}) {
                const std::int32_t j = g.neighbor(k, a, dir);
                if (j >= 0) {
                    trip.emplace_back(k, j, w);
                }
            }
        }
    }
    SparseMatrix J(m, m);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

/// Value of u at an arbitrary point by multilinear interpolation over the
/// full tensor grid; boundary nodes and points outside the box give zero.
double interpolate(const DomainGrid& g, const GridField& u, const Point& y) {
    const int n = g.dim();
    std::vector<int> base(n);
    std::vector<double> frac(n);
    for (int a = 0; a < n; ++a) {
        const double s = (y[a] - g.lower()[a]) / g.spacing()[a];
        const int last = g.nodes_per_axis()[a] - 1;
        if (!(s >= 0.0) || !(s <= last)) {
            return 0.0;
        }
        base[a] = std::min(static_cast<int>(std::floor(s)), last - 1);
        frac[a] = s - base[a];
    }
    double out = 0.0;
    std::vector<int> idx(n);
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        for (int a = 0; a < n; ++a) {
            const int bit = (corner >> a) & 1;
            idx[a] = base[a] + bit;
            w *= bit ? frac[a] : 1.0 - frac[a];
        }
        if (w == 0.0) {
            continue;
        }
        const std::int32_t k = g.active_index(g.full_from_multi(idx));
        if (k >= 0) {
            out += w * u[k];
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json point_json(const Point& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

} // namespace

std::vector<PeakEstimate> extract_peaks(const DomainGrid& grid, const GridField& u, double min_separation,
                                        const PeakSettings& settings) {
    const int n = grid.dim();
    if (u.size() != grid.active_count()) {
        throw DomainError("extract_peaks: field size does not match the grid");
    }
    if (u.size() == 0) {
        return {};
    }
    const double top = u.maxCoeff();
    if (!(top > 0.0)) {
        if (u.minCoeff() < 0.0) {
            throw DomainError("extract_peaks: the field must be nonnegative");
        }
        return {};
    }
    if (u.minCoeff() < -1e-12 * u.cwiseAbs().maxCoeff()) {
        throw DomainError("extract_peaks: the field must be nonnegative");
    }
    const double floor = settings.min_relative_height * top;
    const double wexp = -2.0 / (n - 2.0);
    const double c0 = bubble_c0(n);

    std::vector<PeakEstimate> found;
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        const double v = u[k];
        if (!(v > 0.0) || v < floor) {
            continue;
        }
        bool is_max = true;
        for (int a = 0; a < n && is_max; ++a) {
            for (int dir : {-1, 1}) {
                const std::int32_t j = grid.neighbor(k, a, dir);
                if (j >= 0 && (u[j] > v || (u[j] == v && j < k))) {
                    is_max = false;
                    break;
                }
            }
        }
        if (!is_max) {
            continue;
        }
        PeakEstimate pk;
        pk.node = k;
        pk.center = grid.coords(k);
        const double w0 = std::pow(v, wexp);
        double wmin = w0;
        double curv_sum = 0.0;
        for (int a = 0; a < n; ++a) {
            const std::int32_t lo = grid.neighbor(k, a, -1);
            const std::int32_t hi = grid.neighbor(k, a, +1);
            if (lo < 0 || hi < 0 || !(u[lo] > 0.0) || !(u[hi] > 0.0)) {
                pk.refined = false;
                break;
            }
            const double h = grid.spacing()[a];
            const double wm = std::pow(u[lo], wexp);
            const double wp = std::pow(u[hi], wexp);
            const double second = (wm - 2.0 * w0 + wp) / (h * h);
            if (!(second > 0.0)) {
                pk.refined = false;
                break;
            }
            const double first = (wp - wm) / (2.0 * h);
            const double s = -first / second;
            pk.center[a] += s;
            wmin -= 0.5 * second * s * s;
            curv_sum += second;
        }
        if (pk.refined && wmin > 0.0) {
            pk.height = std::pow(wmin, -(n - 2.0) / 2.0);
            pk.lambda_curv = std::sqrt(curv_sum / n / (2.0 * wmin));
            pk.alpha_hat = pk.height / (c0 * std::pow(pk.lambda_curv, (n - 2.0) / 2.0));
        } else {
            pk.refined = false;
            pk.center = grid.coords(k);
            pk.height = v;
        }
        pk.lambda_hat = std::pow(pk.height / c0, 2.0 / (n - 2.0));
        found.push_back(pk);
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const PeakEstimate& a, const PeakEstimate& b) { return a.height > b.height; });
    std::vector<PeakEstimate> kept;
    for (const auto& pk : found) {
        const bool close = std::any_of(kept.begin(), kept.end(), [&](const PeakEstimate& o) {
            return (o.center - pk.center).norm() < min_separation;
        });
        if (!close) {
            kept.push_back(pk);
        }
    }
    return kept;
}

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Converged:
        return "converged";
    case SolveStatus::Trivial:
        return "trivial";
    case SolveStatus::MaxIter:
        return "max_iter";
    case SolveStatus::Diverged:
        return "diverged";
    case SolveStatus::LostPositivity:
        return "lost_positivity";
    }
    return "diverged";
}

double newton_residual(const DiscreteOperator& op, double eps, const GridField& u, const GridField* forcing) {
    const double q = critical_exponent(op.grid().dim()) - eps;
    return scaled_residual(residual_field(op, eps, u, forcing), u, q);
}

SolveReport newton_solve(const DiscreteOperator& op, double eps, const GridField& u0, const NewtonSettings& settings,
                         const GridField* forcing) {
    const auto& grid = op.grid();
    if (u0.size() != grid.active_count()) {
        throw DomainError("newton_solve: starting field size does not match the grid");
    }
    if (!u0.allFinite()) {
        throw DomainError("newton_solve: starting field is not finite");
    }
    if (!(eps >= 0.0) || !(eps < settings.mu)) {
        throw DomainError("newton_solve: eps must lie in [0, mu)");
    }
    if (forcing != nullptr && forcing->size() != u0.size()) {
        throw DomainError("newton_solve: forcing size does not match the grid");
    }
    const double q = critical_exponent(grid.dim()) - eps;

    SolveReport rep;
    rep.eps = eps;
    rep.u = u0;
    GridField g = residual_field(op, eps, rep.u, forcing);
    double gnorm = g.norm();
    rep.residual = scaled_residual(g, rep.u, q);
    rep.residual_history.push_back(rep.residual);
    const double start = rep.residual;

    std::vector<double> recent{gnorm};
    bool converged = rep.residual <= settings.tol;
    bool failed = false;
    const Eigen::VectorXd inv_diag = op.diagonal().cwiseInverse();
    while (!converged && !failed && rep.iterations < settings.max_iter) {
        const SparseMatrix J = assemble_jacobian(op, eps, rep.u);
        Eigen::MINRES<SparseMatrix, Eigen::Lower | Eigen::Upper, OperatorDiagonal> solver;
        solver.preconditioner().set_inverse(inv_diag);
        solver.setTolerance(settings.linear_tol);
        solver.setMaxIterations(settings.linear_max_iter);
        solver.compute(J);
        const GridField step = solver.solve(-g);
        rep.linear_iterations += static_cast<int>(solver.iterations());
        if (!step.allFinite()) {
            failed = true;
            rep.status = SolveStatus::Diverged;
            rep.message = "linear solve produced a non-finite step";
            break;
        }

        const double ref = *std::max_element(recent.begin(), recent.end());
        double t = 1.0;
        bool accepted = false;
        GridField trial;
        GridField gtrial;
        for (int k = 0; k <= settings.max_backtracks; ++k, t *= 0.5) {
            trial = rep.u + t * step;
            gtrial = residual_field(op, eps, trial, forcing);
            const double tn = gtrial.norm();
            if (std::isfinite(tn) && tn < (1.0 - 1e-4 * t) * ref) {
                accepted = true;
                gnorm = tn;
                break;
            }
        }
        ++rep.iterations;
        if (!accepted) {
            failed = true;
            rep.status = SolveStatus::Diverged;
            rep.message = "line search found no decrease of |G|";
            break;
        }
        rep.u = std::move(trial);
        g = std::move(gtrial);
        recent.push_back(gnorm);
        if (static_cast<int>(recent.size()) > std::max(1, settings.line_search_window)) {
            recent.erase(recent.begin());
        }
        rep.residual = scaled_residual(g, rep.u, q);
        rep.residual_history.push_back(rep.residual);
        if (!std::isfinite(rep.residual) || rep.residual > settings.divergence_factor * std::max(start, 1e-300)) {
            failed = true;
            rep.status = SolveStatus::Diverged;
            rep.message = "residual grew beyond the divergence factor";
            break;
        }
        converged = rep.residual <= settings.tol;
    }

    const double amplitude = rep.u.size() > 0 ? rep.u.cwiseAbs().maxCoeff() : 0.0;
    rep.positive = rep.u.size() > 0 && rep.u.minCoeff() > 0.0;
    if (!failed) {
        if (!converged) {
            rep.status = SolveStatus::MaxIter;
            rep.message = "iteration limit reached";
        } else if (amplitude < settings.trivial_threshold) {
            rep.status = SolveStatus::Trivial;
            rep.message = "converged to the zero solution";
        } else if (!rep.positive && forcing == nullptr) {
            rep.status = SolveStatus::LostPositivity;
            rep.message = "converged to a solution that is not positive";
        } else {
            rep.status = SolveStatus::Converged;
        }
    }
    if (rep.status == SolveStatus::Converged && rep.u.maxCoeff() > 0.0) {
        const double sep = settings.min_separation >= 0.0 ? settings.min_separation : 2.0 * grid.max_spacing();
        rep.peaks = extract_peaks(grid, rep.u.cwiseMax(0.0), sep, settings.peaks);
    }
    return rep;
}

namespace {

void check_schedule(const std::vector<double>& schedule) {
    if (schedule.empty()) {
        throw DomainError("sweep: empty eps schedule");
    }
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] > 0.0) || !(schedule[k] < 1.0)) {
            throw DomainError("sweep: eps must lie in (0, 1)");
        }
        if (k > 0 && !(schedule[k] < schedule[k - 1])) {
            throw DomainError("sweep: eps schedule must be strictly decreasing");
        }
    }
}

/// Index of the peak matched to each predicted center, greedily by distance.
std::vector<std::size_t> match_peaks(const std::vector<PeakEstimate>& peaks, const std::vector<Point>& centers) {
    std::vector<std::size_t> out(centers.size(), peaks.size());
    std::vector<bool> used(peaks.size(), false);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < peaks.size(); ++k) {
            const double d = (peaks[k].center - centers[i]).norm();
            if (!used[k] && d < best) {
                best = d;
                out[i] = k;
            }
        }
        if (out[i] < peaks.size()) {
            used[out[i]] = true;
        }
    }
    return out;
}

GridField rescale_start(const DomainGrid& grid, const GridField& prev, const std::vector<Point>& old_centers,
                        const std::vector<Point>& new_centers, const std::vector<double>& ratio) {
    const int n = grid.dim();
    GridField out(grid.active_count());
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        const Point x = grid.coords(k);
        std::size_t i = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < new_centers.size(); ++j) {
            const double d = (x - new_centers[j]).norm();
            if (d < best) {
                best = d;
                i = j;
            }
        }
        const Point y = old_centers[i] + ratio[i] * (x - new_centers[i]);
        out[k] = std::pow(ratio[i], (n - 2.0) / 2.0) * interpolate(grid, prev, y);
    }
    return out;
}

} // namespace

SweepTable continuation_sweep(const DiscreteOperator& op, const AsymptoticConstants& c,
                              const PredictedSolution& pred0, const std::vector<double>& schedule,
                              const SweepSettings& settings) {
    check_schedule(schedule);
    const auto& grid = op.grid();
    const auto& V = op.potential_spec();
    const std::size_t N = pred0.size();
    SweepTable table;
    table.n = grid.dim();
    table.b = pred0.b;

    ConstructorSettings cs;
    cs.mu = settings.mu;
    cs.eta0 = pred0.eta0;
    auto predicted_at = [&](double eps) {
        return parameters_from_reduced(c, V, pred0.b, pred0.zbar, eps, ReducedVariables::zero(N, table.n), cs);
    };

    GridField prev;
    std::vector<Point> prev_centers;
    PredictedSolution prev_pred;
    for (std::size_t step = 0; step < schedule.size(); ++step) {
        const double eps = schedule[step];
        std::ostringstream why;
        PredictedSolution pred;
        try {
            pred = predicted_at(eps);
        } catch (const std::exception& e) {
            why << "eps = " << eps << ": " << e.what();
            table.stop_reason = why.str();
            return table;
        }
        const double lam_max = *std::max_element(pred.lambda.begin(), pred.lambda.end());
        if (lam_max * grid.max_spacing() > settings.max_lambda_h) {
            why << "grid cap at eps = " << eps << ": predicted lambda h = " << lam_max * grid.max_spacing()
                << " exceeds " << settings.max_lambda_h;
            table.stop_reason = why.str();
            return table;
        }

        GridField start;
        try {
            if (step == 0) {
                start = pred0.ubar ? *pred0.ubar
                                   : assemble_approx_solution(op, pred0, settings.projection, settings.mu);
            } else {
                std::vector<double> ratio(N);
                std::vector<Point> new_centers(N);
                for (std::size_t i = 0; i < N; ++i) {
                    ratio[i] = pred.lambda[i] / prev_pred.lambda[i];
                    new_centers[i] = prev_centers[i] + (pred.centers[i] - prev_pred.centers[i]);
                }
                start = rescale_start(grid, prev, prev_centers, new_centers, ratio);
            }
        } catch (const std::exception& e) {
            why << "start at eps = " << eps << ": " << e.what();
            table.stop_reason = why.str();
            return table;
        }

        const SolveReport rep = newton_solve(op, eps, start, settings.newton);
        if (!rep.ok()) {
            why << "newton at eps = " << eps << ": " << to_string(rep.status) << " (" << rep.message << ")";
            table.stop_reason = why.str();
            return table;
        }
        if (settings.require_peak_count && rep.peaks.size() != N) {
            why << "eps = " << eps << ": found " << rep.peaks.size() << " peaks, expected " << N;
            table.stop_reason = why.str();
            return table;
        }
        for (const auto& pk : rep.peaks) {
            if (!pk.refined || pk.lambda_curv * grid.max_spacing() > settings.max_lambda_h) {
                why << "unresolved at eps = " << eps << ": measured lambda h = " << pk.lambda_curv * grid.max_spacing()
                    << " exceeds " << settings.max_lambda_h;
                table.stop_reason = why.str();
                return table;
            }
        }
        const auto match = match_peaks(rep.peaks, pred.centers);
        std::vector<Point> centers(N);
        for (std::size_t i = 0; i < N; ++i) {
            if (match[i] >= rep.peaks.size()) {
                why << "eps = " << eps << ": no peak for bubble " << i;
                table.stop_reason = why.str();
                return table;
            }
            const auto& pk = rep.peaks[match[i]];
            SweepRow row;
            row.eps = eps;
            row.block = 0;
            row.index = static_cast<int>(i);
            row.lambda_hat = pk.lambda_hat;
            row.lambda_curv = pk.lambda_curv;
            row.a_hat = pk.center;
            row.alpha_hat = pk.alpha_hat;
            row.height = pk.height;
            row.residual = rep.residual;
            row.iterations = rep.iterations;
            table.rows.push_back(row);
            centers[i] = pk.center;
        }
        table.eps_done.push_back(eps);
        prev = rep.u;
        prev_centers = centers;
        prev_pred = pred;
    }
    table.complete = true;
    return table;
}

SweepTable analytic_sweep(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                          const ClusterConfiguration& zbar, const std::vector<double>& schedule, bool use_balancing,
                          const ConstructorSettings& settings) {
    check_schedule(schedule);
    SweepTable table;
    table.n = c.n;
    table.b = b;
    const double c0 = bubble_c0(c.n);
    for (double eps : schedule) {
        PredictedSolution pred;
        double residual = 0.0;
        int iterations = 0;
        try {
            if (use_balancing) {
                BalancingSettings bs;
                bs.constructor = settings;
                const auto sol = solve_balancing(c, V, b, zbar, eps, bs);
                pred = sol.predicted;
                residual = sol.residual_norm;
                iterations = sol.iterations;
            } else {
                pred = parameters_from_reduced(c, V, b, zbar, eps, ReducedVariables::zero(zbar.size(), c.n),
                                               settings);
            }
        } catch (const std::exception& e) {
            table.stop_reason = "eps = " + num(eps) + ": " + e.what();
            return table;
        }
        for (std::size_t i = 0; i < pred.size(); ++i) {
            SweepRow row;
            row.eps = eps;
            row.index = static_cast<int>(i);
            row.lambda_hat = pred.lambda[i];
            row.lambda_curv = pred.lambda[i];
            row.a_hat = pred.centers[i];
            row.alpha_hat = pred.alpha[i];
            row.height = pred.alpha[i] * c0 * std::pow(pred.lambda[i], (c.n - 2.0) / 2.0);
            row.residual = residual;
            row.iterations = iterations;
            table.rows.push_back(row);
        }
        table.eps_done.push_back(eps);
    }
    table.complete = true;
    return table;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw DomainError("fit_line: x and y differ in length");
    }
    const std::size_t m = x.size();
    if (m < 3) {
        throw DomainError("fit_line: at least three points are required");
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    const double xscale = std::max(1.0, std::abs(mx));
    const double yscale = std::max(1.0, std::abs(my));
    if (!(sxx > 1e-24 * xscale * xscale * m)) {
        throw DomainError("fit_line: the predictor column is constant");
    }
    if (!(syy > 1e-24 * yscale * yscale * m)) {
        throw DomainError("fit_line: the response column is constant");
    }
    LineFit f;
    f.samples = static_cast<int>(m);
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double r = y[k] - f.intercept - f.slope * x[k];
        ssr += r * r;
    }
    const double se = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(m - 2));
    f.half_width = boost::math::quantile(dist, 0.975) * se;
    return f;
}

FitReport fit_scaling_law(const SweepTable& table) {
    FitReport rep;
    rep.n = table.n;
    const int sigma = log_power(table.n);
    std::map<std::pair<int, int>, std::vector<const SweepRow*>> groups;
    for (const auto& r : table.rows) {
        groups[{r.block, r.index}].push_back(&r);
    }
    if (groups.empty()) {
        throw DomainError("fit_scaling_law: the sweep table is empty");
    }
    for (const auto& [key, rows] : groups) {
        if (rows.size() < 3) {
            throw DomainError("fit_scaling_law: at least three sweep rows per bubble are required");
        }
        ScalingFit sf;
        sf.block = key.first;
        sf.index = key.second;
        std::vector<double> x;
        std::vector<double> y;
        std::vector<double> xc;
        std::vector<double> yc;
        bool centered = true;
        for (const auto* r : rows) {
            x.push_back(std::log(r->eps) - sigma * std::log(std::abs(std::log(r->eps)) / 2.0));
            y.push_back(std::log(r->lambda_hat));
            const double d = (r->a_hat - table.b).norm();
            if (!(d > 0.0)) {
                centered = false;
            } else {
                xc.push_back(std::log(eta_of_eps(table.n, r->eps)));
                yc.push_back(std::log(d));
            }
        }
        sf.lambda = fit_line(x, y);
        if (centered) {
            sf.center = fit_line(xc, yc);
        }
        rep.fits.push_back(sf);
    }
    return rep;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table, const std::string& config_hash) {
    out << "eps,block,i,lambda_hat,lambda_curv";
    for (int a = 0; a < table.n; ++a) {
        out << ",a_hat_" << a + 1;
    }
    out << ",alpha_hat,height,residual,iterations";
    if (!config_hash.empty()) {
        out << ",config_hash";
    }
    out << '\n';
    for (const auto& r : table.rows) {
        out << num(r.eps) << ',' << r.block << ',' << r.index << ',' << num(r.lambda_hat) << ','
            << num(r.lambda_curv);
        for (int a = 0; a < table.n; ++a) {
            out << ',' << num(r.a_hat[a]);
        }
        out << ',' << num(r.alpha_hat) << ',' << num(r.height) << ',' << num(r.residual) << ',' << r.iterations;
        if (!config_hash.empty()) {
            out << ',' << config_hash;
        }
        out << '\n';
    }
}

nlohmann::json to_json(const PeakEstimate& p) {
    return {{"center", point_json(p.center)}, {"height", p.height},
            {"lambda_hat", p.lambda_hat},     {"lambda_curv", p.lambda_curv},
            {"alpha_hat", p.alpha_hat},       {"node", p.node},
            {"refined", p.refined}};
}

nlohmann::json to_json(const SolveReport& r, bool include_field) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : r.peaks) {
        peaks.push_back(to_json(p));
    }
    nlohmann::json j = {{"eps", r.eps},
                        {"status", to_string(r.status)},
                        {"message", r.message},
                        {"iterations", r.iterations},
                        {"linear_iterations", r.linear_iterations},
                        {"residual", r.residual},
                        {"residual_history", r.residual_history},
                        {"positive", r.positive},
                        {"peaks", peaks}};
    if (include_field) {
        j["u"] = std::vector<double>(r.u.data(), r.u.data() + r.u.size());
    }
    return j;
}

nlohmann::json to_json(const SweepTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"eps", r.eps},
                        {"block", r.block},
                        {"i", r.index},
                        {"lambda_hat", r.lambda_hat},
                        {"lambda_curv", r.lambda_curv},
                        {"a_hat", point_json(r.a_hat)},
                        {"alpha_hat", r.alpha_hat},
                        {"height", r.height},
                        {"residual", r.residual},
                        {"iterations", r.iterations}});
    }
    return {{"n", t.n},           {"b", point_json(t.b)},     {"rows", rows},
            {"eps_done", t.eps_done}, {"complete", t.complete}, {"stop_reason", t.stop_reason}};
}

nlohmann::json to_json(const LineFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"half_width", f.half_width}, {"samples", f.samples}};
}

nlohmann::json to_json(const FitReport& f) {
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& s : f.fits) {
        nlohmann::json j = {{"block", s.block},
                            {"i", s.index},
                            {"lambda", to_json(s.lambda)},
                            {"lambda_target", s.lambda_target},
                            {"center_target", s.center_target}};
        j["center"] = s.center ? to_json(*s.center) : nlohmann::json(nullptr);
        fits.push_back(j);
    }
    return {{"n", f.n}, {"fits", fits}};
}

} // namespace bubblecluster
