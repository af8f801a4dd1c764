#include "bubblecluster/cluster.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>

namespace bubblecluster {

namespace {

void check_configuration(const HessianAnchor& anchor, const ClusterConfiguration& z) {
    const int n = anchor.dim();
    if (z.empty()) {
        throw DomainError("cluster configuration is empty");
    }
    for (const auto& p : z) {
        if (p.size() != n) {
            throw DomainError("cluster point dimension does not match the anchor");
        }
        if (!p.allFinite()) {
            throw DomainError("cluster point is not finite");
        }
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            if ((z[i] - z[j]).norm() == 0.0) {
                throw DomainError("coincident cluster points " + std::to_string(i) + " and " +
                                  std::to_string(j));
            }
        }
    }
}

double min_pairwise(const ClusterConfiguration& z) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            best = std::min(best, (z[i] - z[j]).norm());
        }
    }
    return best;
}

double diameter(const ClusterConfiguration& z) {
    double best = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            best = std::max(best, (z[i] - z[j]).norm());
        }
    }
    for (const auto& p : z) {
        best = std::max(best, p.norm());
    }
    return best;
}

bool lex_less(const Point& a, const Point& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

bool lex_less(const ClusterConfiguration& a, const ClusterConfiguration& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](const Point& x, const Point& y) { return lex_less(x, y); });
}

bool close(double a, double b, double rel_tol) {
    return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

void HessianAnchor::validate() const {
    require_supported_dimension(dim());
    if (H.rows() != dim() || H.cols() != dim()) {
        throw DomainError("anchor Hessian has the wrong shape");
    }
    if (!H.allFinite() || !b.allFinite()) {
        throw DomainError("anchor data is not finite");
    }
    if ((H - H.transpose()).norm() > 1e-12 * std::max(1.0, H.norm())) {
        throw DomainError("anchor Hessian is not symmetric");
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues();
    if (ev.cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
        throw DomainError("anchor Hessian is singular");
    }
}

double F_eval(const HessianAnchor& anchor, const ClusterConfiguration& z) {
    check_configuration(anchor, z);
    const int n = anchor.dim();
    double value = 0.0;
    for (const auto& p : z) {
        value += p.dot(anchor.H * p);
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            value -= 2.0 * std::pow((z[j] - z[i]).norm(), -(n - 2.0));
        }
    }
    return value;
}

std::vector<Point> F_grad(const HessianAnchor& anchor, const ClusterConfiguration& z) {
    check_configuration(anchor, z);
    const int n = anchor.dim();
    std::vector<Point> g;
    g.reserve(z.size());
    for (const auto& p : z) {
        g.push_back(2.0 * (anchor.H * p));
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            const Point r = z[i] - z[j];
            const Point term = (2.0 * (n - 2) * std::pow(r.norm(), -n)) * r;
            g[i] += term;
            g[j] -= term;
        }
    }
    return g;
}

Eigen::MatrixXd F_hess(const HessianAnchor& anchor, const ClusterConfiguration& z) {
    check_configuration(anchor, z);
    const int n = anchor.dim();
    const int N = static_cast<int>(z.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n * N, n * N);
    for (int i = 0; i < N; ++i) {
        hess.block(i * n, i * n, n, n) = 2.0 * anchor.H;
    }
    for (int i = 0; i < N; ++i) {
        for (int j = i + 1; j < N; ++j) {
            const Point r = z[i] - z[j];
            const double d = r.norm();
            const Eigen::MatrixXd K =
                2.0 * (n - 2) *
                (Eigen::MatrixXd::Identity(n, n) * std::pow(d, -n) - n * std::pow(d, -n - 2.0) * (r * r.transpose()));
            hess.block(i * n, i * n, n, n) += K;
            hess.block(j * n, j * n, n, n) += K;
            hess.block(i * n, j * n, n, n) -= K;
            hess.block(j * n, i * n, n, n) -= K;
        }
    }
    return 0.5 * (hess + hess.transpose());
}

Eigen::VectorXd flatten(const ClusterConfiguration& z) {
    if (z.empty()) {
        return {};
    }
    const auto n = z.front().size();
    Eigen::VectorXd v(n * static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i) {
        v.segment(static_cast<Eigen::Index>(i) * n, n) = z[i];
    }
    return v;
}

ClusterConfiguration unflatten(const Eigen::VectorXd& v, int n) {
    if (n <= 0 || v.size() % n != 0) {
        throw DomainError("unflatten: length is not a multiple of the dimension");
    }
    ClusterConfiguration z;
    for (Eigen::Index i = 0; i < v.size() / n; ++i) {
        z.push_back(v.segment(i * n, n));
    }
    return z;
}

CriticalPointCertificate find_critical_point(const HessianAnchor& anchor, int N,
                                             const ClusterConfiguration& init,
                                             const CriticalPointSettings& settings) {
    anchor.validate();
    if (N < 1 || static_cast<int>(init.size()) != N) {
        throw DomainError("initial configuration must contain N >= 1 points");
    }
    if (!(settings.tol > 0.0)) {
        throw DomainError("critical point tolerance must be positive");
    }
    check_configuration(anchor, init);
    const int n = anchor.dim();

    Eigen::VectorXd x = flatten(init);
    Eigen::VectorXd g = flatten(F_grad(anchor, init));
    double gnorm = g.norm();
    int iter = 0;
    while (gnorm >= settings.tol) {
        if (iter >= settings.max_iter) {
            throw ConvergenceError("find_critical_point: iteration limit reached", gnorm, gnorm);
        }
        ++iter;
        const ClusterConfiguration z = unflatten(x, n);
        const Eigen::MatrixXd hess = F_hess(anchor, z);
        const Eigen::VectorXd step = -hess.completeOrthogonalDecomposition().solve(g);
        const double floor = settings.collision_fraction * diameter(z);

        bool accepted = false;
        for (double t = 1.0; t > 1e-12; t *= 0.5) {
            const Eigen::VectorXd trial = x + t * step;
            const ClusterConfiguration tz = unflatten(trial, n);
            if (N > 1 && min_pairwise(tz) < floor) {
                continue;
            }
            const Eigen::VectorXd tg = flatten(F_grad(anchor, tz));
            const double tn = tg.norm();
            if (std::isfinite(tn) && tn <= (1.0 - 1e-4 * t) * gnorm) {
                x = trial;
                g = tg;
                gnorm = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            const bool at_floor = N > 1 && min_pairwise(unflatten(x + 1e-3 * step, n)) < floor;
            throw ConvergenceError(at_floor ? "find_critical_point: collision floor reached"
                                            : "find_critical_point: line search stalled",
                                   gnorm, gnorm);
        }
        if (diameter(unflatten(x, n)) > settings.max_diameter) {
            throw ConvergenceError("find_critical_point: iterates diverged", gnorm, gnorm);
        }
    }

    CriticalPointCertificate cert;
    cert.zbar = unflatten(x, n);
    cert.value = F_eval(anchor, cert.zbar);
    cert.grad_norm = gnorm;
    cert.iterations = iter;
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(F_hess(anchor, cert.zbar)).eigenvalues();
    cert.hess_spectrum.assign(ev.data(), ev.data() + ev.size());
    cert.margin = ev.cwiseAbs().minCoeff();
    cert.nondegenerate = cert.margin > settings.margin_rel * ev.cwiseAbs().maxCoeff();
    return cert;
}

ClusterConfiguration canonical_form(const ClusterConfiguration& z) {
    auto sorted = [](ClusterConfiguration c) {
        std::sort(c.begin(), c.end(), [](const Point& a, const Point& b) { return lex_less(a, b); });
        return c;
    };
    ClusterConfiguration plus = sorted(z);
    ClusterConfiguration neg;
    for (const auto& p : z) {
        neg.push_back(-p);
    }
    neg = sorted(neg);
    return lex_less(neg, plus) ? neg : plus;
}

std::vector<double> configuration_fingerprint(const ClusterConfiguration& z) {
    std::vector<double> dist;
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            dist.push_back((z[i] - z[j]).norm());
        }
    }
    std::sort(dist.begin(), dist.end());
    std::vector<double> norms;
    for (const auto& p : z) {
        norms.push_back(p.norm());
    }
    std::sort(norms.begin(), norms.end());
    dist.insert(dist.end(), norms.begin(), norms.end());
    return dist;
}

std::vector<CriticalPointCertificate> deduplicate(std::vector<CriticalPointCertificate> certs,
                                                  double rel_tol) {
    std::stable_sort(certs.begin(), certs.end(),
                     [](const auto& a, const auto& b) { return a.value < b.value; });
    std::vector<CriticalPointCertificate> out;
    std::vector<std::vector<double>> prints;
    for (auto& c : certs) {
        const auto fp = configuration_fingerprint(c.zbar);
        bool duplicate = false;
        for (std::size_t k = 0; k < out.size() && !duplicate; ++k) {
            if (!close(out[k].value, c.value, rel_tol) || prints[k].size() != fp.size()) {
                continue;
            }
            duplicate = std::equal(fp.begin(), fp.end(), prints[k].begin(),
                                   [&](double a, double b) { return close(a, b, rel_tol); });
        }
        if (!duplicate) {
            prints.push_back(fp);
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<CriticalPointCertificate> multistart_search(const HessianAnchor& anchor, int N,
                                                        const MultistartSettings& settings) {
    anchor.validate();
    if (settings.seeds < 1) {
        throw DomainError("multistart_search requires at least one seed");
    }
    if (N < 1) {
        throw DomainError("multistart_search requires N >= 1");
    }
    const int n = anchor.dim();
    std::vector<std::optional<CriticalPointCertificate>> found(settings.seeds);

    auto run_one = [&](int k) {
        std::seed_seq seq{static_cast<std::uint64_t>(settings.rng_seed >> 32),
                          static_cast<std::uint64_t>(settings.rng_seed & 0xffffffffu),
                          static_cast<std::uint64_t>(k)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> dist(0.0, settings.init_scale);
        ClusterConfiguration init(N, Point(n));
        for (auto& p : init) {
            for (int c = 0; c < n; ++c) {
                p[c] = dist(rng);
            }
        }
        try {
            auto cert = find_critical_point(anchor, N, init, settings.newton);
            if (cert.nondegenerate || settings.keep_degenerate) {
                cert.zbar = canonical_form(cert.zbar);
                found[k] = std::move(cert);
            }
        } catch (const ConvergenceError&) {
        } catch (const DomainError&) {
        }
    };

    const int threads = std::max(1, std::min(settings.threads, settings.seeds));
    if (threads == 1) {
        for (int k = 0; k < settings.seeds; ++k) {
            run_one(k);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int k = next++; k < settings.seeds; k = next++) {
                    run_one(k);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    std::vector<CriticalPointCertificate> certs;
    for (auto& f : found) {
        if (f) {
            certs.push_back(std::move(*f));
        }
    }
    return deduplicate(std::move(certs));
}

nlohmann::json to_json(const CriticalPointCertificate& c) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : c.zbar) {
        points.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    }
    return {{"points", points},
            {"value", c.value},
            {"grad_norm", c.grad_norm},
            {"spectrum", c.hess_spectrum},
            {"margin", c.margin},
            {"nondegenerate", c.nondegenerate},
            {"iterations", c.iterations}};
}

CriticalPointCertificate certificate_from_json(const nlohmann::json& j) {
    CriticalPointCertificate c;
    for (const auto& p : j.at("points")) {
        const auto v = p.get<std::vector<double>>();
        c.zbar.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    c.value = j.at("value").get<double>();
    c.grad_norm = j.at("grad_norm").get<double>();
    c.hess_spectrum = j.at("spectrum").get<std::vector<double>>();
    c.margin = j.at("margin").get<double>();
    c.nondegenerate = j.at("nondegenerate").get<bool>();
    c.iterations = j.value("iterations", 0);
    return c;
}

} // namespace bubblecluster
