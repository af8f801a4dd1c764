#pragma once

#include "bubblecluster/constants.hpp"
#include "bubblecluster/constructor.hpp"
#include "bubblecluster/grid.hpp"
#include "bubblecluster/pde.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bubblecluster {

/// One local maximum of a nonnegative grid field.
///
/// The refinement fits a parabola through three nodes per axis to
/// w = u^{-2/(n-2)}, which is exactly quadratic for a sampled bubble
/// alpha delta_{a, lambda}: w = (c0 alpha)^{-2/(n-2)} (1 + lambda^2 |x-a|^2) / lambda.
struct PeakEstimate {
    Point center;               ///< vertex of the fitted parabolas
    double height = 0.0;        ///< fitted maximum of u
    double lambda_hat = 0.0;    ///< (height / c0)^{2/(n-2)}
    double lambda_curv = 0.0;   ///< sqrt(w'' / (2 w_min)), independent of the amplitude
    double alpha_hat = 0.0;     ///< height / (c0 lambda_curv^{(n-2)/2})
    std::int32_t node = -1;     ///< active index of the maximal node
    bool refined = true;        ///< false when a neighbour of the node lies on the boundary
};

struct PeakSettings {
    /// Local maxima below this fraction of max u are ignored.
    double min_relative_height = 0.1;
};

/// Local maxima of u (ties broken towards the lower index), refined and
/// sorted by decreasing height. Peaks closer than `min_separation` to a
/// higher peak are merged into it. Throws DomainError on negative values
/// below -1e-12 max|u|.
std::vector<PeakEstimate> extract_peaks(const DomainGrid& grid, const GridField& u, double min_separation,
                                        const PeakSettings& settings = {});

enum class SolveStatus { Converged, Trivial, MaxIter, Diverged, LostPositivity };

std::string to_string(SolveStatus s);

struct NewtonSettings {
    /// On |G(u)|_inf / max(1, |u_+^{p-eps}|_inf).
    double tol = 1e-9;
    int max_iter = 30;
    /// eps must lie in [0, mu).
    double mu = 0.1;
    /// Inner solve of the Jacobian system (relative residual).
    double linear_tol = 1e-10;
    int linear_max_iter = 5000;
    int max_backtracks = 30;
    /// Steps are accepted against the largest |G| of the last `window`
    /// iterates (1 gives the monotone line search).
    int line_search_window = 1;
    /// Residual growth over the starting residual that counts as divergence.
    double divergence_factor = 1e8;
    /// |u|_inf below this counts as the trivial branch.
    double trivial_threshold = 1e-8;
    PeakSettings peaks{};
    /// Merge radius of extract_peaks; negative means 2 grid spacings.
    double min_separation = -1.0;
};

struct SolveReport {
    GridField u;
    double eps = 0.0;
    int iterations = 0;
    double residual = 0.0;                 ///< final scaled residual
    std::vector<double> residual_history;  ///< scaled residual before each step and at the end
    int linear_iterations = 0;             ///< summed over the Newton steps
    bool positive = false;                 ///< u > 0 at every active node
    SolveStatus status = SolveStatus::MaxIter;
    std::string message;
    std::vector<PeakEstimate> peaks;

    bool ok() const { return status == SolveStatus::Converged; }
};

/// Scaled residual of G(u) = (-Delta_h + V) u - u_+^{p-eps} - f.
double newton_residual(const DiscreteOperator& op, double eps, const GridField& u, const GridField* forcing = nullptr);

/// Newton iteration on G(u) = 0 with a backtracking line search on |G|.
/// The Jacobian -Delta_h + V - (p-eps) u_+^{p-1-eps} is indefinite at
/// bubble solutions and is solved with preconditioned MINRES. The optional
/// forcing f is subtracted from G (manufactured solutions).
/// Throws DomainError for non-finite u0 or eps outside [0, mu); every
/// numerical failure is reported through the status instead.
SolveReport newton_solve(const DiscreteOperator& op, double eps, const GridField& u0,
                         const NewtonSettings& settings = {}, const GridField* forcing = nullptr);

/// One bubble of one sweep step.
struct SweepRow {
    double eps = 0.0;
    int block = 0;
    int index = 0;
    double lambda_hat = 0.0;
    double lambda_curv = 0.0;
    Point a_hat;
    double alpha_hat = 0.0;
    double height = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct SweepTable {
    int n = 0;
    Point b;  ///< anchor of the cluster
    std::vector<SweepRow> rows;
    std::vector<double> eps_done;
    bool complete = false;
    std::string stop_reason;  ///< empty when complete
};

struct SweepSettings {
    NewtonSettings newton{};
    ProjectionSettings projection{};
    /// Resolution cap on lambda * h. A step is refused when a predicted
    /// rate exceeds it before the solve, and rejected as unresolved when the
    /// curvature rate of an extracted peak exceeds it after the solve.
    double max_lambda_h = 1.0;
    /// Membership radius used when assembling the starting field.
    double mu = 0.5;
    /// Every step must find exactly as many peaks as predicted bubbles.
    bool require_peak_count = true;
};

/// Warm-started continuation in eps. The first step starts from
/// pred0.ubar, or from the approximate solution assembled from pred0.
/// Later steps rescale the previous solution around each extracted peak
/// by the ratio of the predicted concentration rates and shift it by the
/// predicted center drift. The first failed step (grid cap, unresolved
/// peaks, Newton failure, lost or missing peaks) ends the sweep; the rows computed so far
/// are kept. Throws DomainError when the schedule is empty or not strictly
/// decreasing.
SweepTable continuation_sweep(const DiscreteOperator& op, const AsymptoticConstants& c,
                              const PredictedSolution& pred0, const std::vector<double>& schedule,
                              const SweepSettings& settings = {});

/// The same table built from the constructor alone: rows hold the
/// predicted parameters (or the solution of the balancing system when
/// `use_balancing` is set) instead of peaks of a discrete solution.
SweepTable analytic_sweep(const AsymptoticConstants& c, const PotentialSpec& V, const Point& b,
                          const ClusterConfiguration& zbar, const std::vector<double>& schedule,
                          bool use_balancing = false, const ConstructorSettings& settings = {});

/// Ordinary least squares y = intercept + slope x with the two-sided 95%
/// confidence half-width of the slope.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double half_width = 0.0;
    int samples = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Fits of one bubble index across the sweep.
struct ScalingFit {
    int block = 0;
    int index = 0;
    /// ln lambda_hat against ln eps - sigma_n ln(|ln eps| / 2); target -1/2.
    LineFit lambda;
    double lambda_target = -0.5;
    /// ln |a_hat - b| against ln eta(eps); target 1. Absent when the
    /// bubble sits at the anchor.
    std::optional<LineFit> center;
    double center_target = 1.0;
};

struct FitReport {
    int n = 0;
    std::vector<ScalingFit> fits;
};

/// Requires at least three distinct eps values per bubble. Throws
/// DomainError for too few rows and for constant columns.
FitReport fit_scaling_law(const SweepTable& table);

/// eps, block, i, lambda_hat, lambda_curv, a_hat_1..a_hat_n, alpha_hat,
/// height, residual, iterations, and a trailing config_hash column when
/// `config_hash` is non-empty. Values are written with 17 significant digits.
void write_sweep_csv(std::ostream& out, const SweepTable& table, const std::string& config_hash = "");

nlohmann::json to_json(const PeakEstimate& p);
nlohmann::json to_json(const SolveReport& r, bool include_field = false);
nlohmann::json to_json(const SweepTable& t);
nlohmann::json to_json(const LineFit& f);
nlohmann::json to_json(const FitReport& f);

} // namespace bubblecluster
