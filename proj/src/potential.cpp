#include "bubblecluster/potential.hpp"

#include "bubblecluster/errors.hpp"

#include <cmath>
#include <sstream>

namespace bubblecluster {

namespace {

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) {
        r *= x;
    }
    return r;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

PotentialSpec PotentialSpec::parse_polynomial(int n, const std::string& text) {
    require_supported_dimension(n);
    PotentialSpec spec(n);
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw DomainError("polynomial term '" + item + "' lacks ':'");
        }
        Monomial m;
        const std::string coef = trim(item.substr(0, colon));
        const std::string powers = trim(item.substr(colon + 1));
        std::size_t used = 0;
        try {
            m.coef = std::stod(coef, &used);
        } catch (const std::exception&) {
            throw DomainError("bad coefficient in polynomial term '" + item + "'");
        }
        if (used != coef.size()) {
            throw DomainError("bad coefficient in polynomial term '" + item + "'");
        }
        if (static_cast<int>(powers.size()) != n) {
            throw DomainError("polynomial term '" + item + "' needs " + std::to_string(n) + " exponent digits");
        }
        for (char c : powers) {
            if (c < '0' || c > '9') {
                throw DomainError("bad exponent digit in polynomial term '" + item + "'");
            }
            m.powers.push_back(c - '0');
        }
        spec.add_monomial(std::move(m));
    }
    return spec;
}

PotentialSpec PotentialSpec::constant(int n, double value) {
    PotentialSpec spec(n);
    spec.add_monomial({value, std::vector<int>(n, 0)});
    return spec;
}

void PotentialSpec::add_monomial(Monomial m) {
    if (static_cast<int>(m.powers.size()) != n_) {
        throw DomainError("monomial dimension mismatch");
    }
    for (int p : m.powers) {
        if (p < 0) {
            throw DomainError("monomial exponents must be non-negative");
        }
    }
    monomials_.push_back(std::move(m));
}

void PotentialSpec::add_radial(RadialTerm t) {
    if (t.center.size() != n_) {
        throw DomainError("radial term dimension mismatch");
    }
    radial_.push_back(std::move(t));
}

void PotentialSpec::add_anchor(Point b) {
    if (b.size() != n_) {
        throw DomainError("anchor dimension mismatch");
    }
    anchors_.push_back(std::move(b));
}

double PotentialSpec::value(const Point& x) const {
    double v = 0.0;
    for (const auto& m : monomials_) {
        double t = m.coef;
        for (int k = 0; k < n_; ++k) {
            t *= ipow(x[k], m.powers[k]);
        }
        v += t;
    }
    for (const auto& r : radial_) {
        const double rho = (x - r.center).squaredNorm();
        double pw = 1.0;
        for (double c : r.coefs) {
            v += c * pw;
            pw *= rho;
        }
    }
    return v;
}

Point PotentialSpec::gradient(const Point& x) const {
    Point g = Point::Zero(n_);
    for (const auto& m : monomials_) {
        for (int k = 0; k < n_; ++k) {
            if (m.powers[k] == 0) {
                continue;
            }
            double t = m.coef * m.powers[k] * ipow(x[k], m.powers[k] - 1);
            for (int l = 0; l < n_; ++l) {
                if (l != k) {
                    t *= ipow(x[l], m.powers[l]);
                }
            }
            g[k] += t;
        }
    }
    for (const auto& r : radial_) {
        const Point d = x - r.center;
        const double rho = d.squaredNorm();
        double f1 = 0.0;
        for (std::size_t k = 1; k < r.coefs.size(); ++k) {
            f1 += r.coefs[k] * k * ipow(rho, static_cast<int>(k) - 1);
        }
        g += 2.0 * f1 * d;
    }
    return g;
}

Eigen::MatrixXd PotentialSpec::hessian(const Point& x) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& m : monomials_) {
        for (int a = 0; a < n_; ++a) {
            for (int b = 0; b < n_; ++b) {
                std::vector<int> p = m.powers;
                double t = m.coef;
                t *= p[a];
                p[a] -= 1;
                if (p[a] < 0) {
                    continue;
                }
                t *= p[b];
                p[b] -= 1;
                if (p[b] < 0 || t == 0.0) {
                    continue;
                }
                for (int l = 0; l < n_; ++l) {
                    t *= ipow(x[l], p[l]);
                }
                h(a, b) += t;
            }
        }
    }
    for (const auto& r : radial_) {
        const Point d = x - r.center;
        const double rho = d.squaredNorm();
        double f1 = 0.0;
        double f2 = 0.0;
        for (std::size_t k = 1; k < r.coefs.size(); ++k) {
            f1 += r.coefs[k] * k * ipow(rho, static_cast<int>(k) - 1);
            if (k >= 2) {
                f2 += r.coefs[k] * k * (k - 1.0) * ipow(rho, static_cast<int>(k) - 2);
            }
        }
        h += 2.0 * f1 * Eigen::MatrixXd::Identity(n_, n_) + 4.0 * f2 * (d * d.transpose());
    }
    return h;
}

void PotentialSpec::validate_anchors(double tol) const {
    for (std::size_t k = 0; k < anchors_.size(); ++k) {
        const Point& b = anchors_[k];
        const double g = gradient(b).norm();
        if (!(g < tol)) {
            throw PreconditionError("anchor " + std::to_string(k) + " is not a critical point of V (|grad V| = " +
                                    std::to_string(g) + ")");
        }
        if (!(value(b) > 0.0)) {
            throw PreconditionError("V must be positive at anchor " + std::to_string(k));
        }
        try {
            anchor(k).validate();
        } catch (const DomainError& e) {
            throw PreconditionError("anchor " + std::to_string(k) + ": " + e.what());
        }
    }
}

HessianAnchor PotentialSpec::anchor(std::size_t k) const {
    if (k >= anchors_.size()) {
        throw DomainError("anchor index out of range");
    }
    return {anchors_[k], hessian(anchors_[k])};
}

nlohmann::json PotentialSpec::to_json() const {
    nlohmann::json mono = nlohmann::json::array();
    for (const auto& m : monomials_) {
        mono.push_back({{"coef", m.coef}, {"powers", m.powers}});
    }
    nlohmann::json rad = nlohmann::json::array();
    for (const auto& r : radial_) {
        rad.push_back({{"center", std::vector<double>(r.center.data(), r.center.data() + r.center.size())},
                       {"coefs", r.coefs}});
    }
    nlohmann::json anc = nlohmann::json::array();
    for (const auto& b : anchors_) {
        anc.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    }
    return {{"n", n_}, {"monomials", mono}, {"radial", rad}, {"anchors", anc}};
}

} // namespace bubblecluster
