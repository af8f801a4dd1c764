#include "bubblecluster/pde.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bubblecluster {

GridField sample(const DomainGrid& grid, const std::function<double(const Point&)>& f) {
    GridField out(grid.active_count());
    for (std::int32_t k = 0; k < grid.active_count(); ++k) {
        out[k] = f(grid.coords(k));
    }
    return out;
}

DiscreteOperator::DiscreteOperator(const DomainGrid& grid, const PotentialSpec& V)
    : grid_(&grid), spec_(&V) {
    const int n = grid.dim();
    if (V.dim() != n) {
        throw DomainError("potential dimension does not match the grid");
    }
    for (std::int64_t f = 0; f < grid.total_nodes(); ++f) {
        const double v = V.value(grid.coords_full(f));
        if (!(v > 0.0)) {
            throw PreconditionError("potential is not positive at grid node " + std::to_string(f));
        }
    }
    inv_h2_.resize(n);
    double stencil = 0.0;
    for (int a = 0; a < n; ++a) {
        inv_h2_[a] = 1.0 / (grid.spacing()[a] * grid.spacing()[a]);
        stencil += 2.0 * inv_h2_[a];
    }
    V_ = sample(grid, [&](const Point& x) { return V.value(x); });
    diag_ = V_.array() + stencil;
}

void DiscreteOperator::apply(const GridField& u, GridField& out, const Eigen::VectorXd* extra) const {
    const auto& g = *grid_;
    const int n = g.dim();
    const std::int32_t m = g.active_count();
    if (u.size() != m) {
        throw DomainError("field size does not match the grid");
    }
    out.resize(m);
    for (std::int32_t k = 0; k < m; ++k) {
        double acc = diag_[k] * u[k];
        for (int a = 0; a < n; ++a) {
            const std::int32_t lo = g.neighbor(k, a, -1);
            const std::int32_t hi = g.neighbor(k, a, +1);
            double s = 0.0;
            if (lo >= 0) {
                s += u[lo];
            }
            if (hi >= 0) {
                s += u[hi];
            }
            acc -= inv_h2_[a] * s;
        }
        if (extra != nullptr) {
            acc += (*extra)[k] * u[k];
        }
        out[k] = acc;
    }
}

GridField DiscreteOperator::apply(const GridField& u) const {
    GridField out;
    apply(u, out);
    return out;
}

GridField DiscreteOperator::minus_laplacian_of(const std::function<double(const Point&)>& f) const {
    const auto& g = *grid_;
    const int n = g.dim();
    const GridField s = sample(g, f);
    GridField out(g.active_count());
    for (std::int32_t k = 0; k < g.active_count(); ++k) {
        const Point x = g.coords(k);
        double acc = 0.0;
        for (int a = 0; a < n; ++a) {
            double side = 0.0;
            for (int dir : {-1, +1}) {
                const std::int32_t nb = g.neighbor(k, a, dir);
                if (nb >= 0) {
                    side += s[nb];
                } else {
                    Point y = x;
                    y[a] += dir * g.spacing()[a];
                    side += f(y);
                }
            }
            acc += inv_h2_[a] * (2.0 * s[k] - side);
        }
        out[k] = acc;
    }
    return out;
}

GridField apply_operator(const DiscreteOperator& op, const GridField& u) {
    return op.apply(u);
}

LinearSolveResult solve_linear(const DiscreteOperator& op, const GridField& rhs,
                               const LinearSolveSettings& settings) {
    const std::int32_t m = op.grid().active_count();
    if (rhs.size() != m) {
        throw DomainError("right-hand side size does not match the grid");
    }
    LinearSolveResult res;
    res.x = GridField::Zero(m);
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) {
        return res;
    }
    const Eigen::VectorXd inv_diag = op.diagonal().cwiseInverse();
    GridField r = rhs;
    GridField z = inv_diag.cwiseProduct(r);
    GridField p = z;
    GridField q(m);
    double rz = r.dot(z);
    double rel = 1.0;
    for (int it = 1; it <= settings.max_iter; ++it) {
        op.apply(p, q);
        const double alpha = rz / p.dot(q);
        res.x += alpha * p;
        r -= alpha * q;
        rel = r.norm() / bnorm;
        if (rel <= settings.tol) {
            res.iterations = it;
            res.relative_residual = rel;
            return res;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw ConvergenceError("conjugate gradients: iteration cap reached", rel, rel);
}

double inner_product(const DiscreteOperator& op, const GridField& u, const GridField& w) {
    const auto& g = op.grid();
    const int n = g.dim();
    if (u.size() != g.active_count() || w.size() != g.active_count()) {
        throw DomainError("field size does not match the grid");
    }
    double grad = 0.0;
    for (std::int32_t k = 0; k < g.active_count(); ++k) {
        for (int a = 0; a < n; ++a) {
            const double ih2 = 1.0 / (g.spacing()[a] * g.spacing()[a]);
            const std::int32_t lo = g.neighbor(k, a, -1);
            const double ul = lo >= 0 ? u[lo] : 0.0;
            const double wl = lo >= 0 ? w[lo] : 0.0;
            grad += ih2 * (u[k] - ul) * (w[k] - wl);
            if (g.neighbor(k, a, +1) < 0) {
                grad += ih2 * u[k] * w[k];
            }
        }
    }
    const double pot = (op.potential().array() * u.array() * w.array()).sum();
    return (grad + pot) * g.cell_volume();
}

double norm(const DiscreteOperator& op, const GridField& u) {
    return std::sqrt(std::max(0.0, inner_product(op, u, u)));
}

double l2_dot(const DomainGrid& grid, const GridField& u, const GridField& w) {
    return u.dot(w) * grid.cell_volume();
}

double functional_eval(const DiscreteOperator& op, double eps, const GridField& u) {
    const int n = op.grid().dim();
    const double q = critical_exponent(n) + 1.0 - eps;
    const double power = u.array().abs().pow(q).sum() * op.grid().cell_volume();
    return 0.5 * inner_product(op, u, u) - power / q;
}

double gradient_pairing(const DiscreteOperator& op, double eps, const GridField& u, const GridField& phi) {
    const int n = op.grid().dim();
    const double e = critical_exponent(n) - 1.0 - eps;
    const double nonlinear =
        (u.array().abs().pow(e) * u.array() * phi.array()).sum() * op.grid().cell_volume();
    return inner_product(op, u, phi) - nonlinear;
}

void check_representable(const DomainGrid& grid, const BubbleParams& p, const ProjectionSettings& settings) {
    p.validate();
    if (p.dim() != grid.dim()) {
        throw DomainError("bubble dimension does not match the grid");
    }
    const double lh = p.lambda * grid.max_spacing();
    if (lh > settings.max_lambda_h) {
        throw ResolutionRefusal("lambda*h = " + std::to_string(lh) + " exceeds the cap " +
                                std::to_string(settings.max_lambda_h));
    }
    const double d0 = settings.d0 >= 0.0 ? settings.d0 : 0.1 * grid.min_half_width();
    if (!(grid.distance_to_boundary(p.center) > 2.0 * d0)) {
        throw PreconditionError("bubble center is within 2*d0 of the boundary");
    }
}

namespace {

GridField projection_rhs(const DiscreteOperator& op, const BubbleParams& p, ProjectionSource source,
                         int which) {
    // which: -2 the bubble itself, -1 the lambda derivative, j >= 0 the a_j derivative
    const int n = p.dim();
    const double pw = critical_exponent(n);
    if (source == ProjectionSource::DiscreteLaplacian) {
        return op.minus_laplacian_of([&](const Point& x) {
            if (which == -2) {
                return bubble_eval(p, x);
            }
            const auto d = bubble_derivatives(p, x);
            return which == -1 ? d.dl : d.da[which];
        });
    }
    return sample(op.grid(), [&](const Point& x) {
        const double delta = bubble_eval(p, x);
        if (which == -2) {
            return std::pow(delta, pw);
        }
        const auto d = bubble_derivatives(p, x);
        return pw * std::pow(delta, pw - 1.0) * (which == -1 ? d.dl : d.da[which]);
    });
}

} // namespace

ProjectedBubble project_bubble(const DiscreteOperator& op, const BubbleParams& p,
                               const ProjectionSettings& settings) {
    check_representable(op.grid(), p, settings);
    ProjectedBubble out;
    out.params = p;
    const auto solved = solve_linear(op, projection_rhs(op, p, settings.source, -2), settings.solve);
    out.pi_delta = solved.x;
    out.iterations = solved.iterations;
    out.delta = sample(op.grid(), [&](const Point& x) { return bubble_eval(p, x); });
    out.theta = out.delta - out.pi_delta;
    const double scale = out.delta.maxCoeff();
    const double below = std::max(0.0, -out.pi_delta.minCoeff());
    const double above = std::max(0.0, -out.theta.minCoeff());
    out.ordering_violation = std::max(below, above) / scale;
    out.ordering_ok = out.ordering_violation <= 10.0 * settings.solve.tol;
    return out;
}

std::vector<GridField> basis_fields(const DiscreteOperator& op, const BubbleParams& p,
                                    const ProjectionSettings& settings) {
    check_representable(op.grid(), p, settings);
    std::vector<GridField> out;
    for (int which = -2; which < p.dim(); ++which) {
        out.push_back(solve_linear(op, projection_rhs(op, p, settings.source, which), settings.solve).x);
    }
    return out;
}

GridField basis_field(const DiscreteOperator& op, const BubbleParams& p, int index,
                      const ProjectionSettings& settings) {
    if (index < 0 || index >= p.dim() + 2) {
        throw DomainError("basis_field: index out of range");
    }
    check_representable(op.grid(), p, settings);
    return solve_linear(op, projection_rhs(op, p, settings.source, index - 2), settings.solve).x;
}

} // namespace bubblecluster
