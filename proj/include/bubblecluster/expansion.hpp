#pragma once

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/constants.hpp"
#include "bubblecluster/grid.hpp"
#include "bubblecluster/pde.hpp"
#include "bubblecluster/potential.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bubblecluster {

/// Parameters (alpha, a, lambda) of a sum of projected bubbles, together
/// with the subcritical defect eps.
struct ClusterState {
    double eps = 0.0;
    std::vector<double> alpha;
    std::vector<BubbleParams> bubbles;

    std::size_t size() const { return bubbles.size(); }
    int dim() const { return bubbles.empty() ? 0 : bubbles.front().dim(); }
    /// Throws DomainError on mismatched sizes, non-positive weights or rates.
    void validate() const;
};

/// Interaction eps_ij of bubbles i and j of a state.
double state_interaction(const ClusterState& s, std::size_t i, std::size_t j);

/// Empty when the state lies in O(N, mu); otherwise a description of the
/// first violated condition. The interior margin d(a_i, boundary) > 2 d0 is
/// checked only when a grid is supplied.
std::string membership_violation(const ClusterState& s, double mu, const DomainGrid* grid = nullptr,
                                 double d0 = 0.0);

/// Throws PreconditionError carrying membership_violation's message.
void require_membership(const ClusterState& s, double mu, const DomainGrid* grid = nullptr, double d0 = 0.0);

/// lambda^-2 (n >= 5), ln(lambda)/lambda^2 (n = 4), 1/lambda (n = 3).
double remainder_T2(int n, double lambda);

/// t^{(n+2)/(2(n-2))} (ln 1/t)^{(n+2)/(2n)} for n >= 6 and t otherwise.
/// The logarithm is evaluated at min(t, e^-1) so it stays >= 1.
double remainder_T3(int n, double t);

/// Bracket of the interaction estimate between a projection defect of
/// bubble 1 and the power of bubble 2.
double remainder_Xi(int n, const BubbleParams& b1, const BubbleParams& b2);

/// Shapes of the remainders of the gradient expansions for bubble i.
/// T3 and Xi_12 are the sums over the other bubbles.
struct RemainderBudget {
    double T2 = 0.0;
    double T3 = 0.0;
    double R_alpha = 0.0;
    double R_lambda = 0.0;
    double R_a = 0.0;
    double R_v = 0.0;
    double Xi_12 = 0.0;
};

/// Budgets at bubble i. `v_norm2` is |v|^2 of the correction (zero for
/// states built from projected bubbles alone).
RemainderBudget remainder_budget(const ClusterState& s, std::size_t i, double v_norm2 = 0.0);

/// alpha S_n (1 - alpha^{p-1-eps} lambda^{-eps(n-2)/2}).
double predict_alpha_pairing(const AsymptoticConstants& c, double alpha, double lambda, double eps);

/// Leading part of the pairing of the gradient with lambda_i d(pi delta_i)/d(lambda_i).
double predict_lambda_pairing(const AsymptoticConstants& c, const ClusterState& s, const PotentialSpec& V,
                              std::size_t i);

/// Leading part of the pairing of the gradient with lambda_i^-1 d(pi delta_i)/d(a_i).
Eigen::VectorXd predict_point_pairing(const AsymptoticConstants& c, const ClusterState& s, const PotentialSpec& V,
                                      std::size_t i);

enum class ExpansionKind { Alpha, Lambda, Point };

std::string to_string(ExpansionKind k);
ExpansionKind expansion_kind_from_string(const std::string& s);

/// Numeric pairing against its predicted leading term. Alpha and Lambda
/// reports carry one component, Point reports n components.
struct ExpansionReport {
    ExpansionKind kind = ExpansionKind::Alpha;
    std::size_t index = 0;
    Eigen::VectorXd numeric;
    Eigen::VectorXd predicted;
    Eigen::VectorXd remainder;  ///< numeric - predicted
    RemainderBudget budget;
    double budget_value = 0.0;  ///< the budget entry matching `kind`
    double ratio = 0.0;         ///< |remainder| / budget_value
};

struct ExpansionSettings {
    double mu = 0.1;
    ProjectionSettings projection{};
};

/// Builds u = sum alpha_k pi delta_k on the operator's grid and pairs the
/// discrete gradient with the basis field of `kind` at bubble i.
ExpansionReport verify_expansion(const DiscreteOperator& op, const AsymptoticConstants& c, const ClusterState& s,
                                 ExpansionKind kind, std::size_t i, const ExpansionSettings& settings = {});

/// All kinds at every bubble, sharing the projected bubbles.
std::vector<ExpansionReport> verify_expansions(const DiscreteOperator& op, const AsymptoticConstants& c,
                                               const ClusterState& s, const ExpansionSettings& settings = {});

nlohmann::json to_json(const RemainderBudget& b);
nlohmann::json to_json(const ExpansionReport& r);

// ---------------------------------------------------------------------------
// Ratio audits of the integral estimates used by the expansions.

struct AuditRow {
    std::string family;    ///< "power", "orthogonal", "defect" or "projection"
    std::string quantity;  ///< which estimate within the family
    double lambda_1 = 0.0;
    double lambda_2 = 0.0;   ///< zero for single-bubble rows
    double separation = 0.0; ///< |a_1 - a_2|, zero for single-bubble rows
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;  ///< lhs / rhs
};

struct AuditSummary {
    std::string family;
    std::string quantity;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    int samples = 0;
    double spread() const { return max_ratio / min_ratio; }
};

struct AuditSample {
    BubbleParams first;
    std::optional<BubbleParams> second;
};

struct AuditSettings {
    double mu = 0.1;
    double eps = 0.05;  ///< eps entering the orthogonal-coupling bound
    /// Exponent pairs (alpha, beta) of the power rows; empty means
    /// {(p, 1), (n/(n-2) + 1/2, n/(n-2) - 1/2)}.
    std::vector<std::pair<double, double>> exponents;
    /// Families to audit, any of "power", "orthogonal", "defect", "projection".
    std::vector<std::string> families{"power", "orthogonal", "defect", "projection"};
    ProjectionSettings projection{};
    int threads = 1;
};

struct AuditTable {
    std::vector<AuditRow> rows;
    std::vector<AuditSummary> summaries;
};

/// Grid quadrature of delta_1^a delta_2^b against eps_12^{min(a, b)}.
/// Rejects a = b, a + b != 2n/(n-2) and eps_12 >= mu.
AuditRow audit_power_interaction(const DomainGrid& grid, const BubbleParams& b1, const BubbleParams& b2,
                                 double a_exp, double b_exp, double mu);

/// Rows for |pi delta|^2 - S_n, <pi delta, lambda d_lambda pi delta> and
/// |<pi delta, lambda^-1 d_a pi delta>| against their ln^sigma lambda / lambda^m shapes.
std::vector<AuditRow> audit_single_projection(const DiscreteOperator& op, const AsymptoticConstants& c,
                                              const BubbleParams& b, const ProjectionSettings& settings = {});

/// |<pi delta_1, pi delta_2>| against eps_12.
AuditRow audit_projection_cross(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                double mu, const ProjectionSettings& settings = {});

/// sum delta_2^p |theta_1| h^n against (lambda_1 lambda_2)^{-(n-2)/2} + eps_12 Xi_12.
AuditRow audit_defect_interaction(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                  double mu, const ProjectionSettings& settings = {});

/// |sum u^{p-1-eps} v pi delta_1 h^n| / |v| against eps + T2 + sum T3, with
/// u = pi delta_1 + pi delta_2 and v a smooth field made orthogonal to
/// every basis field of both bubbles.
AuditRow audit_orthogonal_coupling(const DiscreteOperator& op, const BubbleParams& b1, const BubbleParams& b2,
                                   double eps, double mu, const ProjectionSettings& settings = {});

/// Runs every applicable audit on each sample; rows are ordered by sample
/// and then by family regardless of the thread count.
AuditTable audit_appendix(const DiscreteOperator& op, const AsymptoticConstants& c,
                          const std::vector<AuditSample>& samples, const AuditSettings& settings = {});

std::vector<AuditSummary> summarize(const std::vector<AuditRow>& rows);

nlohmann::json to_json(const AuditRow& r);
nlohmann::json to_json(const AuditSummary& s);

} // namespace bubblecluster
