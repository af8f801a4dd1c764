#pragma once

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/cluster.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace bubblecluster {

/// coef * prod_k x_k^{powers[k]}
struct Monomial {
    double coef = 0.0;
    std::vector<int> powers;
};

/// sum_k coefs[k] * rho^k with rho = |x - center|^2
struct RadialTerm {
    Point center;
    std::vector<double> coefs;
};

/// Potential V built from polynomial and radial-profile terms, so that V,
/// grad V and D^2 V are exact. Anchors are the declared critical points b_k.
class PotentialSpec {
public:
    PotentialSpec() = default;
    explicit PotentialSpec(int n) : n_(n) {}

    /// Parses "coef:powers, coef:powers, ..." where `powers` is a string of
    /// n single digits, e.g. "2:0000, -1:2000, 0.5:0200" in dimension four.
    static PotentialSpec parse_polynomial(int n, const std::string& text);
    static PotentialSpec constant(int n, double value);

    int dim() const { return n_; }
    void add_monomial(Monomial m);
    void add_radial(RadialTerm t);
    void add_anchor(Point b);

    const std::vector<Monomial>& monomials() const { return monomials_; }
    const std::vector<RadialTerm>& radial_terms() const { return radial_; }
    const std::vector<Point>& anchors() const { return anchors_; }

    double value(const Point& x) const;
    Point gradient(const Point& x) const;
    Eigen::MatrixXd hessian(const Point& x) const;

    /// Throws PreconditionError unless |grad V(b)| < tol and D^2 V(b) is
    /// invertible at every declared anchor.
    void validate_anchors(double tol = 1e-10) const;
    HessianAnchor anchor(std::size_t k) const;

    nlohmann::json to_json() const;

private:
    int n_ = 0;
    std::vector<Monomial> monomials_;
    std::vector<RadialTerm> radial_;
    std::vector<Point> anchors_;
};

} // namespace bubblecluster
