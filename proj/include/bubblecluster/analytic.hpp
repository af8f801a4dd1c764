#pragma once

#include <Eigen/Dense>

namespace bubblecluster {

using Point = Eigen::VectorXd;

/// Exponent p = (n+2)/(n-2) of the critical nonlinearity.
double critical_exponent(int n);

/// Normalisation c0 = [n(n-2)]^{(n-2)/4} of the standard bubble.
double bubble_c0(int n);

/// 1 in dimension four (logarithmic corrections), 0 otherwise.
int log_power(int n);

/// gamma = (n-4)/(2n), the exponent of the cluster length scale for n >= 5.
double cluster_gamma(int n);

/// Surface measure of the unit sphere S^{n-1}.
double sphere_measure(int n);

/// Throws DomainError unless 3 <= n <= 6.
void require_supported_dimension(int n);

/// One bubble: center `center` in R^n and concentration rate `lambda`.
struct BubbleParams {
    Point center;
    double lambda = 1.0;

    int dim() const { return static_cast<int>(center.size()); }
    void validate() const;
};

/// Standard bubble c0 lambda^{(n-2)/2} (1 + lambda^2 |x-a|^2)^{-(n-2)/2}.
double bubble_eval(const BubbleParams& p, const Point& x);

/// Radial profile of the bubble at distance r from its center.
double bubble_radial(int n, double lambda, double r);

struct BubbleDerivatives {
    double dl = 0.0;  ///< lambda * d(delta)/d(lambda)
    Point da;         ///< lambda^{-1} * d(delta)/d(a)
};

BubbleDerivatives bubble_derivatives(const BubbleParams& p, const Point& x);

/// Interaction between two bubbles and its scaled derivatives.
struct InteractionValue {
    double eps = 0.0;
    double d_lambda_i = 0.0;  ///< lambda_i * d(eps)/d(lambda_i)
    double d_lambda_j = 0.0;  ///< lambda_j * d(eps)/d(lambda_j)
    Point d_a_i;              ///< lambda_i^{-1} * d(eps)/d(a_i)
};

/// eps_ij = (l_i/l_j + l_j/l_i + l_i l_j |a_i - a_j|^2)^{(2-n)/2}.
InteractionValue epsilon_ij(const BubbleParams& pi, const BubbleParams& pj);

/// Cluster length scale: eps^gamma for n >= 5, |ln eps|^{-1/4} for n = 4.
/// Requires 0 < eps < 1.
double eta_of_eps(int n, double eps);

/// Shape of the interior bound on theta = delta - pi_delta:
/// ln^{sigma_n}(lambda)/lambda^2 + r^2 |ln r|^{sigma_n}, r = |x - a|.
double projection_shape_R1(int n, double lambda, double r);

/// Shape of the interior bound on the a-derivative of theta:
/// 1/lambda^2 + r/lambda.
double projection_shape_R2(double lambda, double r);

/// Largest absolute value, over the fixed radii {0.25, 0.5, 1, 1.5, 2, 3},
/// of the centered finite-difference residual of
///   -(u'' + (n-1)/r u') - u^p
/// for the radial profile u of the unit bubble with step h. The exact
/// profile solves the equation, so the result is pure truncation error.
double radial_equation_residual(int n, double h);

} // namespace bubblecluster
