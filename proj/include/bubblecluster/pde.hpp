#pragma once

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/grid.hpp"
#include "bubblecluster/potential.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace bubblecluster {

/// Values at the active nodes of a DomainGrid; boundary nodes are zero.
using GridField = Eigen::VectorXd;

/// Samples f at every active node.
GridField sample(const DomainGrid& grid, const std::function<double(const Point&)>& f);

/// Discrete -Delta + V with zero Dirichlet data, (2n+1)-point stencil.
/// Holds V sampled on the active nodes. Construction checks V > 0 on every
/// grid node (boundary included) and throws PreconditionError otherwise.
class DiscreteOperator {
public:
    DiscreteOperator(const DomainGrid& grid, const PotentialSpec& V);

    const DomainGrid& grid() const { return *grid_; }
    const PotentialSpec& potential_spec() const { return *spec_; }
    const Eigen::VectorXd& potential() const { return V_; }
    const Eigen::VectorXd& diagonal() const { return diag_; }

    /// out = (-Delta_h + V + extra) u, with `extra` an optional diagonal.
    void apply(const GridField& u, GridField& out, const Eigen::VectorXd* extra = nullptr) const;
    GridField apply(const GridField& u) const;

    /// -Delta_h applied to f sampled on all nodes, including the (nonzero)
    /// boundary samples. This is the discrete Laplacian of a function that
    /// does not vanish on the boundary.
    GridField minus_laplacian_of(const std::function<double(const Point&)>& f) const;

private:
    const DomainGrid* grid_;
    const PotentialSpec* spec_;
    Eigen::VectorXd V_;
    Eigen::VectorXd diag_;
    std::vector<double> inv_h2_;
};

/// Free-function form of DiscreteOperator::apply.
GridField apply_operator(const DiscreteOperator& op, const GridField& u);

struct LinearSolveSettings {
    double tol = 1e-10;  ///< relative residual |r| / |rhs|
    int max_iter = 20000;
};

struct LinearSolveResult {
    GridField x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients on the SPD system
/// (-Delta_h + V) x = rhs. Throws ConvergenceError at the iteration cap.
LinearSolveResult solve_linear(const DiscreteOperator& op, const GridField& rhs,
                               const LinearSolveSettings& settings = {});

/// Discrete energy scalar product: edge differences (boundary edges
/// included) plus the V-weighted sum, times the cell volume. Equals
/// sum (A u) w h^n for fields with zero boundary trace.
double inner_product(const DiscreteOperator& op, const GridField& u, const GridField& w);
double norm(const DiscreteOperator& op, const GridField& u);

/// Plain nodal quadrature sum u w h^n.
double l2_dot(const DomainGrid& grid, const GridField& u, const GridField& w);

/// 1/2 |u|^2 - (p+1-eps)^{-1} sum |u|^{p+1-eps} h^n.
double functional_eval(const DiscreteOperator& op, double eps, const GridField& u);

/// <u, phi> - sum |u|^{p-1-eps} u phi h^n.
double gradient_pairing(const DiscreteOperator& op, double eps, const GridField& u, const GridField& phi);

enum class ProjectionSource {
    /// rhs = -Delta_h of the sampled bubble (boundary samples included).
    DiscreteLaplacian,
    /// rhs = delta^p sampled pointwise.
    AnalyticPower,
};

struct ProjectionSettings {
    ProjectionSource source = ProjectionSource::AnalyticPower;
    double max_lambda_h = 0.5;
    double d0 = -1.0;  ///< interior margin; negative means 10% of the smallest half-width
    LinearSolveSettings solve{1e-11, 20000};
};

struct ProjectedBubble {
    BubbleParams params;
    GridField pi_delta;
    GridField theta;  ///< delta - pi_delta
    GridField delta;  ///< sampled bubble
    /// max over nodes of max(-pi_delta, pi_delta - delta), relative to max delta
    double ordering_violation = 0.0;
    bool ordering_ok = true;
    int iterations = 0;
};

/// Throws ResolutionRefusal when lambda * h exceeds the cap and
/// PreconditionError when the center is within 2 d0 of the boundary.
void check_representable(const DomainGrid& grid, const BubbleParams& p, const ProjectionSettings& settings);

/// Solves -Delta_h w + V w = rhs(delta) with zero boundary data.
ProjectedBubble project_bubble(const DiscreteOperator& op, const BubbleParams& p,
                               const ProjectionSettings& settings = {});

/// pi_delta, lambda d(pi_delta)/d(lambda), lambda^{-1} d(pi_delta)/d(a_j)
/// for j = 1..n, each from the projection equation with the differentiated
/// right-hand side.
std::vector<GridField> basis_fields(const DiscreteOperator& op, const BubbleParams& p,
                                    const ProjectionSettings& settings = {});

/// One entry of basis_fields: index 0 is pi_delta, 1 the lambda derivative,
/// 2 + j the derivative along axis j.
GridField basis_field(const DiscreteOperator& op, const BubbleParams& p, int index,
                      const ProjectionSettings& settings = {});

} // namespace bubblecluster
