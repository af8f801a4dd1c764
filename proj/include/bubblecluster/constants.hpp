#pragma once

#include "bubblecluster/quadrature.hpp"

#include <nlohmann/json.hpp>

namespace bubblecluster {

enum class QuadratureScheme { MappedGaussKronrod, ExpSinh };

/// Dimension-dependent constants of the gradient expansions.
///
/// Every integral over R^n is reduced to a radial integral times the sphere
/// measure. In dimension four c(n) and c2(n) are given by closed forms
/// because their integral representations diverge logarithmically there.
/// In dimension three c(n) and c2(n) do not exist and are stored as NaN
/// with `outside_theorem_scope` set.
struct AsymptoticConstants {
    int n = 0;
    double c0 = 0.0;
    double S_n = 0.0;      ///< integral of delta_{0,1}^{2n/(n-2)}
    double c2 = 0.0;       ///< coefficient of eps in the lambda-balance
    double c2bar = 0.0;    ///< interaction coefficient
    double c_of_n = 0.0;   ///< coefficient of the potential in the lambda-balance
    double c2_of_n = 0.0;  ///< coefficient of grad V in the point balance
    int sigma_n = 0;       ///< log power (1 iff n = 4)
    double gamma = 0.0;    ///< (n-4)/(2n)
    bool outside_theorem_scope = false;

    struct Errors {
        double S_n = 0.0;
        double c2 = 0.0;
        double c2bar = 0.0;
        double c_of_n = 0.0;
        double c2_of_n = 0.0;
    } errors;

    /// Cluster scale factor (c2bar/c2(n))^{1/n} (c2/(c(n) V(b)))^gamma.
    double sigma(double V_at_anchor) const;
};

AsymptoticConstants compute_constants(int n, const QuadratureSettings& quad = {},
                                      QuadratureScheme scheme = QuadratureScheme::MappedGaussKronrod);

/// Largest relative disagreement between the two quadrature schemes over
/// the quadrature-derived constants.
double constants_scheme_disagreement(const AsymptoticConstants& a, const AsymptoticConstants& b);

nlohmann::json to_json(const AsymptoticConstants& c);

} // namespace bubblecluster
