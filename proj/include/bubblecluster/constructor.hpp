#pragma once

#include "bubblecluster/cluster.hpp"
#include "bubblecluster/constants.hpp"
#include "bubblecluster/expansion.hpp"
#include "bubblecluster/grid.hpp"
#include "bubblecluster/pde.hpp"
#include "bubblecluster/potential.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bubblecluster {

/// Deviations from the leading-order parameters:
///   beta_i = 1 - alpha_i^{p-1},
///   a_i - b = eta(eps) sigma (zeta_i + zbar_i),
///   1/lambda_i^2 = c2/(c(n) V(b)) eps (|ln eps|/2)^{-sigma_n} (1 + Lambda_i).
struct ReducedVariables {
    Eigen::VectorXd beta;
    Eigen::VectorXd Lambda;
    std::vector<Point> zeta;

    static ReducedVariables zero(std::size_t N, int n);
    std::size_t size() const { return static_cast<std::size_t>(beta.size()); }
    /// (beta, Lambda, zeta_1, ..., zeta_N) stacked.
    Eigen::VectorXd stacked() const;
    static ReducedVariables unstack(const Eigen::VectorXd& x, std::size_t N, int n);
};

/// Membership of the parameters in the windows around the leading-order
/// prediction, one flag per condition.
struct WindowChecks {
    bool alpha_ok = true;   ///< |alpha_i - 1| < eps ln^2 eps
    bool lambda_ok = true;  ///< ln^sigma(lambda)/(lambda^2 eps) within a factor `window_c` of c2/(c(n) V(b))
    bool center_ok = true;  ///< |a_i - b - eta sigma zbar_i| <= eta eta0
    double max_alpha_dev = 0.0;
    double lambda_ratio_min = 0.0;  ///< of ln^sigma(lambda)/(lambda^2 eps) / (c2/(c(n) V(b)))
    double lambda_ratio_max = 0.0;
    double max_center_dev = 0.0;    ///< max |a_i - b - eta sigma zbar_i| / eta
    bool all() const { return alpha_ok && lambda_ok && center_ok; }
    std::string violation() const;
};

struct PredictedSolution {
    double eps = 0.0;
    Point b;
    ClusterConfiguration zbar;
    std::vector<double> alpha;
    std::vector<double> lambda;
    std::vector<Point> centers;
    double eta = 0.0;    ///< eta(eps)
    double sigma = 0.0;  ///< cluster scale factor at b
    double eta0 = 0.0;   ///< window radius
    WindowChecks windows;
    std::string membership;  ///< empty when the parameters lie in O(N, mu)
    std::optional<GridField> ubar;

    std::size_t size() const { return alpha.size(); }
    ClusterState state() const;
};

struct ConstructorSettings {
    double mu = 0.1;
    double eta0 = -1.0;     ///< negative means 0.25 * min_{i != j} |zbar_i - zbar_j|
    double window_c = 4.0;  ///< two-sided factor of the lambda window
    /// Optional domain: when set the interior margin d(a_i, boundary) > 2 d0
    /// is part of the membership check.
    const DomainGrid* grid = nullptr;
    double d0 = -1.0;       ///< negative means 10% of the grid's smallest half-width
};

/// Parameters at beta = Lambda = zeta = 0. Throws PreconditionError when b
/// is not a declared anchor of V, when zbar has coincident points or when
/// the parameters leave O(N, mu) (the message names the violated condition).
PredictedSolution predicted_parameters(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                       const ClusterConfiguration& zbar, double eps,
                                       const ConstructorSettings& settings = {});

/// Parameters at the given reduced variables, without the membership check.
PredictedSolution parameters_from_reduced(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                          const ClusterConfiguration& zbar, double eps,
                                          const ReducedVariables& r, const ConstructorSettings& settings = {});

/// Leading-order balancing system, stacked as
///   alpha-block  1 - alpha_i^{p-1-eps} lambda_i^{-eps(n-2)/2}   (N entries)
///   lambda-block predicted lambda pairing / (c2 eps)             (N entries)
///   zeta-block   linearised point balance                         (nN entries)
/// The zeta-block is
///   D^2V(b) zeta_i - (n-2) sum_j (zeta_j - zeta_i)/|zbar_ji|^n
///   + n(n-2) sum_j <zbar_ji/|zbar_ji|^2, zeta_j - zeta_i> zbar_ji/|zbar_ji|^n
///   - (n-2) sum_j zbar_ji/|zbar_ji|^n ((n-6)/4 Lambda_i + (n-2)/4 Lambda_j)
/// with zbar_ji = zbar_j - zbar_i. Throws PreconditionError when the state
/// leaves the windows.
Eigen::VectorXd balancing_residual(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                   const ClusterConfiguration& zbar, double eps, const ReducedVariables& r,
                                   const ConstructorSettings& settings = {});

/// Exact Jacobian of balancing_residual with respect to the stacked
/// reduced variables (forward-mode automatic differentiation).
Eigen::MatrixXd balancing_jacobian(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                   const ClusterConfiguration& zbar, double eps, const ReducedVariables& r,
                                   const ConstructorSettings& settings = {});

struct BalancingSettings {
    double tol = 1e-12;  ///< on the max-norm of the residual
    int max_iter = 50;
    ConstructorSettings constructor{};
};

struct BalancingSolution {
    ReducedVariables vars;
    PredictedSolution predicted;
    int iterations = 0;
    double residual_norm = 0.0;
    double jacobian_min_singular = 0.0;  ///< invertibility margin at the solution
    double jacobian_condition = 0.0;
};

/// Newton iteration on balancing_residual from the zero state. Throws
/// ConvergenceError on non-convergence and PreconditionError when an
/// iterate leaves the windows.
BalancingSolution solve_balancing(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                                  const ClusterConfiguration& zbar, double eps,
                                  const BalancingSettings& settings = {});

/// sum_i alpha_i pi delta_{a_i, lambda_i} on the grid of `op`. Throws
/// PreconditionError when the parameters leave O(N, mu) on this grid and
/// ResolutionRefusal when a bubble is too sharp for the grid.
GridField assemble_approx_solution(const DiscreteOperator& op, const PredictedSolution& pred,
                                   const ProjectionSettings& settings = {}, double mu = 0.1);

/// L2 norm (nodal quadrature) of -Delta_h u + V u - u_+^{p-eps}.
double approx_residual_l2(const DiscreteOperator& op, const GridField& u, double eps);

struct BlockSpec {
    Point b;
    ClusterConfiguration zbar;
};

struct MultiBlockPrediction {
    std::vector<PredictedSolution> blocks;
    double max_cross_interaction = 0.0;  ///< over bubble pairs in different blocks
    double within_scale = 0.0;           ///< eps, the order of the lambda-balance main term
    double ratio = 0.0;                  ///< max_cross_interaction / within_scale
    bool negligible = true;              ///< ratio below the threshold
    std::string status;                  ///< "ok" or a warning
};

/// One prediction per block plus the size of the cross-block interactions.
/// Anchors closer than `min_anchor_separation` are rejected.
MultiBlockPrediction multi_block_predict(const AsymptoticConstants& c, const PotentialSpec& V,
                                         const std::vector<BlockSpec>& blocks, double eps,
                                         const ConstructorSettings& settings = {},
                                         double cross_threshold = 0.25, double min_anchor_separation = 1e-6);

/// c2bar / sigma^{n-1} (c2 / (c(n) V(b)))^{(n-2)/2}.
double constant_c10(const AsymptoticConstants& c, double V_at_anchor);

nlohmann::json to_json(const ReducedVariables& r);
nlohmann::json to_json(const WindowChecks& w);
nlohmann::json to_json(const PredictedSolution& p);
nlohmann::json to_json(const BalancingSolution& s);
nlohmann::json to_json(const MultiBlockPrediction& m);

} // namespace bubblecluster
