#pragma once

#include "bubblecluster/analytic.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace bubblecluster {

/// Non-degenerate critical point b of the potential and H = D^2 V(b).
struct HessianAnchor {
    Point b;
    Eigen::MatrixXd H;

    int dim() const { return static_cast<int>(b.size()); }
    /// Checks shape, symmetry and invertibility of H.
    void validate() const;
};

/// N points z_1..z_N in R^n.
using ClusterConfiguration = std::vector<Point>;

/// F(z) = sum_i z_i^T H z_i - sum_{i != j} |z_j - z_i|^{-(n-2)}
/// (ordered double sum). Throws DomainError on coincident points.
double F_eval(const HessianAnchor& anchor, const ClusterConfiguration& z);

/// Gradient of F, one n-vector per point.
std::vector<Point> F_grad(const HessianAnchor& anchor, const ClusterConfiguration& z);

/// Exact (nN)x(nN) Hessian of F; block (i,j) couples z_i and z_j.
Eigen::MatrixXd F_hess(const HessianAnchor& anchor, const ClusterConfiguration& z);

Eigen::VectorXd flatten(const ClusterConfiguration& z);
ClusterConfiguration unflatten(const Eigen::VectorXd& v, int n);

struct CriticalPointSettings {
    double tol = 1e-11;             ///< on the Euclidean norm of the stacked gradient
    int max_iter = 100;
    double collision_fraction = 1e-3;  ///< floor on pairwise distance, times the diameter
    double margin_rel = 1e-8;       ///< non-degeneracy gap relative to max |eigenvalue|
    double max_diameter = 1e6;      ///< iterates escaping this far count as divergence
};

struct CriticalPointCertificate {
    ClusterConfiguration zbar;
    double value = 0.0;
    double grad_norm = 0.0;
    std::vector<double> hess_spectrum;  ///< ascending
    bool nondegenerate = false;
    double margin = 0.0;                ///< smallest |eigenvalue|
    int iterations = 0;
};

/// Damped Newton on grad F = 0 from `init`. Steps that would bring two
/// points closer than the collision floor are shortened. Throws
/// ConvergenceError when no point with grad_norm < tol is reached. A
/// degenerate limit is returned with `nondegenerate` false.
CriticalPointCertificate find_critical_point(const HessianAnchor& anchor, int N,
                                             const ClusterConfiguration& init,
                                             const CriticalPointSettings& settings = {});

/// Sorts the points lexicographically and picks the sign of the
/// configuration (z or -z) whose sorted form is lexicographically smaller.
ClusterConfiguration canonical_form(const ClusterConfiguration& z);

/// Sorted pairwise distances followed by sorted norms; invariant under
/// permutation and global negation.
std::vector<double> configuration_fingerprint(const ClusterConfiguration& z);

/// Removes certificates equivalent modulo permutation and negation
/// (fingerprints and values equal to `rel_tol`), then sorts by value.
std::vector<CriticalPointCertificate> deduplicate(std::vector<CriticalPointCertificate> certs,
                                                  double rel_tol = 1e-8);

struct MultistartSettings {
    int seeds = 64;
    std::uint64_t rng_seed = 0;
    double init_scale = 1.0;
    int threads = 1;
    bool keep_degenerate = false;
    CriticalPointSettings newton{};
};

/// Runs find_critical_point from `seeds` random initial configurations.
/// Start k draws from its own generator seeded by (rng_seed, k), so the
/// result does not depend on the thread count. An empty list is a valid
/// outcome.
std::vector<CriticalPointCertificate> multistart_search(const HessianAnchor& anchor, int N,
                                                        const MultistartSettings& settings = {});

nlohmann::json to_json(const CriticalPointCertificate& c);
CriticalPointCertificate certificate_from_json(const nlohmann::json& j);

} // namespace bubblecluster
