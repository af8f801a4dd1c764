#include "bubblecluster/analytic.hpp"
#include "bubblecluster/cluster.hpp"
#include "bubblecluster/constants.hpp"
#include "bubblecluster/constructor.hpp"
#include "bubblecluster/errors.hpp"
#include "bubblecluster/expansion.hpp"
#include "bubblecluster/experiment.hpp"
#include "bubblecluster/newton.hpp"
#include "bubblecluster/pde.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bubblecluster;

namespace {

py::object to_python(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& v : j) {
                out.append(to_python(v));
            }
            return out;
        }
        case nlohmann::json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) {
                out[py::str(k)] = to_python(v);
            }
            return out;
        }
        default:
            return py::none();
    }
}

ClusterConfiguration to_configuration(const std::vector<Eigen::VectorXd>& pts) {
    return ClusterConfiguration(pts.begin(), pts.end());
}

PotentialSpec make_potential(int n, const std::string& polynomial, const Eigen::VectorXd& anchor) {
    auto V = PotentialSpec::parse_polynomial(n, polynomial);
    V.add_anchor(anchor);
    return V;
}

ConstructorSettings constructor_settings(double mu) {
    ConstructorSettings cs;
    cs.mu = mu;
    return cs;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bubble-cluster constants, cluster certificates, predictions and experiments";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "constants",
        [](int n, const std::string& scheme) {
            QuadratureScheme s;
            if (scheme == "gauss_kronrod") {
                s = QuadratureScheme::MappedGaussKronrod;
            } else if (scheme == "exp_sinh") {
                s = QuadratureScheme::ExpSinh;
            } else {
                throw DomainError("scheme must be gauss_kronrod or exp_sinh");
            }
            return to_python(to_json(compute_constants(n, {}, s)));
        },
        py::arg("n"), py::arg("scheme") = "gauss_kronrod");

    m.def(
        "bubble_eval",
        [](const Eigen::VectorXd& center, double lam, const Eigen::VectorXd& x) {
            return bubble_eval({center, lam}, x);
        },
        py::arg("center"), py::arg("lam"), py::arg("x"));

    m.def(
        "epsilon_ij",
        [](const Eigen::VectorXd& a1, double l1, const Eigen::VectorXd& a2, double l2) {
            return epsilon_ij({a1, l1}, {a2, l2}).eps;
        },
        py::arg("a1"), py::arg("lam1"), py::arg("a2"), py::arg("lam2"));

    m.def("eta_of_eps", &eta_of_eps, py::arg("n"), py::arg("eps"));

    m.def(
        "find_critical_point",
        [](const Eigen::MatrixXd& H, const std::vector<Eigen::VectorXd>& init) {
            const HessianAnchor anchor{Eigen::VectorXd::Zero(H.rows()), H};
            const auto cert = find_critical_point(anchor, static_cast<int>(init.size()), to_configuration(init));
            auto j = to_json(cert);
            ClusterConfiguration canon = canonical_form(cert.zbar);
            j["points"] = nlohmann::json::array();
            for (const auto& p : canon) {
                j["points"].push_back(std::vector<double>(p.data(), p.data() + p.size()));
            }
            return to_python(j);
        },
        py::arg("H"), py::arg("init"));

    m.def(
        "multistart_search",
        [](const Eigen::MatrixXd& H, int N, int seeds, std::uint64_t rng_seed, int threads) {
            MultistartSettings ms;
            ms.seeds = seeds;
            ms.rng_seed = rng_seed;
            ms.threads = threads;
            const HessianAnchor anchor{Eigen::VectorXd::Zero(H.rows()), H};
            std::vector<CriticalPointCertificate> certs;
            {
                py::gil_scoped_release release;
                certs = multistart_search(anchor, N, ms);
            }
            py::list out;
            for (const auto& c : certs) {
                out.append(to_python(to_json(c)));
            }
            return out;
        },
        py::arg("H"), py::arg("N"), py::arg("seeds") = 64, py::arg("rng_seed") = 0, py::arg("threads") = 1);

    m.def(
        "predicted_parameters",
        [](int n, const std::string& polynomial, const Eigen::VectorXd& anchor,
           const std::vector<Eigen::VectorXd>& zbar, double eps, double mu) {
            const auto V = make_potential(n, polynomial, anchor);
            return to_python(to_json(predicted_parameters(compute_constants(n), V, anchor, to_configuration(zbar),
                                                          eps, constructor_settings(mu))));
        },
        py::arg("n"), py::arg("polynomial"), py::arg("anchor"), py::arg("zbar"), py::arg("eps"),
        py::arg("mu") = 0.5);

    m.def(
        "solve_balancing",
        [](int n, const std::string& polynomial, const Eigen::VectorXd& anchor,
           const std::vector<Eigen::VectorXd>& zbar, double eps, double mu) {
            const auto V = make_potential(n, polynomial, anchor);
            BalancingSettings bs;
            bs.constructor = constructor_settings(mu);
            return to_python(
                to_json(solve_balancing(compute_constants(n), V, anchor, to_configuration(zbar), eps, bs)));
        },
        py::arg("n"), py::arg("polynomial"), py::arg("anchor"), py::arg("zbar"), py::arg("eps"),
        py::arg("mu") = 0.5);

    m.def(
        "analytic_sweep",
        [](int n, const std::string& polynomial, const Eigen::VectorXd& anchor,
           const std::vector<Eigen::VectorXd>& zbar, const std::vector<double>& schedule, bool balancing,
           double mu) {
            const auto V = make_potential(n, polynomial, anchor);
            const auto table = analytic_sweep(compute_constants(n), V, anchor, to_configuration(zbar), schedule,
                                              balancing, constructor_settings(mu));
            nlohmann::json j{{"table", to_json(table)}};
            if (table.eps_done.size() >= 3) {
                j["fit"] = to_json(fit_scaling_law(table));
            }
            return to_python(j);
        },
        py::arg("n"), py::arg("polynomial"), py::arg("anchor"), py::arg("zbar"), py::arg("schedule"),
        py::arg("balancing") = false, py::arg("mu") = 0.5);

    m.def(
        "project_bubble",
        [](int n, double half_width, int nodes, const Eigen::VectorXd& center, double lam, double v0) {
            const auto grid = build_grid(cube_spec(n, half_width, nodes));
            const auto V = PotentialSpec::constant(n, v0);
            const DiscreteOperator op(grid, V);
            const auto pb = project_bubble(op, {center, lam});
            py::dict out;
            out["pi_delta"] = Eigen::VectorXd(pb.pi_delta);
            out["delta"] = Eigen::VectorXd(pb.delta);
            out["ordering_ok"] = pb.ordering_ok;
            out["ordering_violation"] = pb.ordering_violation;
            out["iterations"] = pb.iterations;
            return out;
        },
        py::arg("n"), py::arg("half_width"), py::arg("nodes"), py::arg("center"), py::arg("lam"),
        py::arg("v0") = 1.0);

    m.def(
        "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& stage, const std::string& out,
           std::optional<std::uint64_t> seed, std::optional<int> threads) {
            ExperimentConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const ConfigError& e) {
                py::dict r;
                r["exit_code"] = 1;
                r["failed_stage"] = "";
                r["message"] = std::string(e.what());
                r["config_hash"] = "";
                r["files"] = py::list();
                return r;
            }
            if (!out.empty()) {
                cfg.output_dir = out;
            }
            if (seed) {
                cfg.seed = *seed;
            }
            if (threads) {
                cfg.threads = *threads;
            }
            const Stage st = stage_from_string(stage);
            RunResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(cfg, st);
            }
            py::dict r;
            r["exit_code"] = res.exit_code;
            r["failed_stage"] = res.failed_stage;
            r["message"] = res.message;
            r["config_hash"] = res.config_hash;
            r["files"] = res.files;
            return r;
        },
        py::arg("config"), py::arg("stage") = "all", py::arg("out") = "", py::arg("seed") = py::none(),
        py::arg("threads") = py::none());

    m.def("version_info", []() { return to_python(version_info()); });
}
