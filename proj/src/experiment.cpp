#include "bubblecluster/experiment.hpp"

#include "bubblecluster/cluster.hpp"
#include "bubblecluster/constants.hpp"
#include "bubblecluster/constructor.hpp"
#include "bubblecluster/errors.hpp"
#include "bubblecluster/expansion.hpp"
#include "bubblecluster/grid.hpp"
#include "bubblecluster/newton.hpp"
#include "bubblecluster/pde.hpp"

#include <Eigen/Core>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef BUBBLECLUSTER_VERSION
#define BUBBLECLUSTER_VERSION "0.0.0"
#endif

namespace bubblecluster {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Values may carry a trailing " ; comment" or " # comment".
std::string strip_comment(const std::string& s) {
    std::size_t cut = std::string::npos;
    for (std::size_t k = 1; k < s.size(); ++k) {
        if ((s[k] == ';' || s[k] == '#') && (s[k - 1] == ' ' || s[k - 1] == '\t')) {
            cut = k;
            break;
        }
    }
    return trim(s.substr(0, cut));
}

std::vector<std::string> split_any(const std::string& s, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (seps.find(ch) != std::string::npos) {
            if (!cur.empty()) {
                out.push_back(cur);
            }
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + s + "' is not a number");
    }
    if (used != s.size() || !std::isfinite(v)) {
        throw ConfigError(key + ": '" + s + "' is not a finite number");
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + s + "' is not an integer");
    }
    if (used != s.size()) {
        throw ConfigError(key + ": '" + s + "' is not an integer");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "yes" || s == "1") {
        return true;
    }
    if (s == "false" || s == "no" || s == "0") {
        return false;
    }
    throw ConfigError(key + ": '" + s + "' is not a boolean");
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_any(s, ", \t")) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

Point parse_point(const std::string& key, const std::string& s) {
    const auto v = parse_list(key, s);
    Point p(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
        p[static_cast<Eigen::Index>(k)] = v[k];
    }
    return p;
}

std::vector<double> to_vec(const Point& p) { return {p.data(), p.data() + p.size()}; }

// Reads a section and rejects keys outside `allowed`.
class Section {
public:
    Section(const pt::ptree& root, const std::string& name, std::set<std::string> allowed)
        : name_(name) {
        // Section names such as "radial.0" contain the default path separator.
        const auto child = root.find(name);
        if (child == root.not_found()) {
            return;
        }
        for (const auto& [key, node] : child->second) {
            if (!node.empty()) {
                throw ConfigError("[" + name + "] has a nested entry '" + key + "'");
            }
            if (!allowed.count(key)) {
                throw ConfigError("[" + name + "] has unknown key '" + key + "'");
            }
            values_[key] = strip_comment(node.data());
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string label(const std::string& key) const { return name_ + "." + key; }

    std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double number(const std::string& key, double fallback) const {
        return has(key) ? parse_double(label(key), values_.at(key)) : fallback;
    }
    long long integer(const std::string& key, long long fallback) const {
        return has(key) ? parse_int(label(key), values_.at(key)) : fallback;
    }
    bool boolean(const std::string& key, bool fallback) const {
        return has(key) ? parse_bool(label(key), values_.at(key)) : fallback;
    }
    std::vector<double> list(const std::string& key) const {
        return has(key) ? parse_list(label(key), values_.at(key)) : std::vector<double>{};
    }

private:
    std::string name_;
    std::map<std::string, std::string> values_;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

DomainGrid experiment_grid(const ExperimentConfig& cfg) {
    auto spec = box_spec(cfg.domain_center, std::vector<double>(cfg.n, cfg.half_width), cfg.nodes);
    return build_grid(spec);
}

double default_d0(const DomainGrid& grid) { return 0.1 * grid.min_half_width(); }

ClusterState verification_state(const ExperimentConfig& cfg, const Point& b, double lambda) {
    ClusterState s;
    s.eps = cfg.verify_eps;
    s.alpha = {cfg.verify_alpha};
    s.bubbles = {BubbleParams{b, lambda}};
    return s;
}

ProjectionSettings projection_settings(const ExperimentConfig& cfg) {
    ProjectionSettings p;
    p.max_lambda_h = cfg.projection_max_lambda_h;
    return p;
}

bool needs(Stage run, Stage s) {
    if (run == Stage::All) {
        return true;
    }
    switch (run) {
        case Stage::Constants:
            return s == Stage::Constants;
        case Stage::Cluster:
            return s == Stage::Cluster;
        case Stage::Construct:
            return s == Stage::Constants || s == Stage::Cluster || s == Stage::Construct;
        case Stage::VerifyExpansions:
            return s == Stage::Constants || s == Stage::VerifyExpansions;
        case Stage::Sweep:
            return s == Stage::Constants || s == Stage::Cluster || s == Stage::Sweep;
        default:
            return false;
    }
}

// Thrown inside a stage to report a numerical failure with a reason.
class StageFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

} // namespace

PotentialSpec ExperimentConfig::potential() const {
    PotentialSpec V = polynomial.empty() ? PotentialSpec(n) : PotentialSpec::parse_polynomial(n, polynomial);
    for (const auto& t : radial) {
        V.add_radial(t);
    }
    for (const auto& b : anchors) {
        V.add_anchor(b);
    }
    return V;
}

nlohmann::json ExperimentConfig::canonical() const {
    auto radial_json = nlohmann::json::array();
    for (const auto& t : radial) {
        radial_json.push_back({{"center", to_vec(t.center)}, {"coefs", t.coefs}});
    }
    auto anchors_json = nlohmann::json::array();
    for (const auto& b : anchors) {
        anchors_json.push_back(to_vec(b));
    }
    return {{"n", n},
            {"seed", seed},
            {"potential", {{"polynomial", polynomial}, {"radial", radial_json}, {"anchors", anchors_json}}},
            {"cluster",
             {{"sizes", cluster_sizes}, {"seeds", seeds}, {"init_scale", init_scale}, {"tol", cluster_tol}}},
            {"domain", {{"center", to_vec(domain_center)}, {"half_width", half_width}, {"nodes", nodes}}},
            {"schedule", schedule},
            {"verify", {{"eps", verify_eps}, {"lambda", verify_lambda}, {"alpha", verify_alpha}}},
            {"construct", {{"balancing", balancing}}},
            {"sweep",
             {{"mode", sweep_mode == SweepMode::Pde ? "pde" : "analytic"},
              {"block", sweep_block},
              {"balancing", sweep_balancing}}},
            {"tolerances",
             {{"mu", mu},
              {"newton_tol", newton_tol},
              {"linear_tol", linear_tol},
              {"max_lambda_h", max_lambda_h},
              {"projection_max_lambda_h", projection_max_lambda_h}}}};
}

ExperimentConfig parse_config(const std::string& text) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    static const std::set<std::string> known{"run",    "potential", "cluster",    "domain", "schedule",
                                             "verify", "construct", "sweep",      "tolerances", "output"};
    std::set<std::string> radial_sections;
    for (const auto& [name, node] : root) {
        if (node.empty()) {
            throw ConfigError("key '" + name + "' lies outside any section");
        }
        if (name.rfind("radial.", 0) == 0) {
            radial_sections.insert(name);
        } else if (!known.count(name)) {
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    ExperimentConfig cfg;
    const Section run(root, "run", {"n", "seed", "threads"});
    if (!run.has("n")) {
        throw ConfigError("[run] needs n");
    }
    cfg.n = static_cast<int>(run.integer("n", 4));
    const long long seed = run.integer("seed", 0);
    if (seed < 0) {
        throw ConfigError("run.seed must be nonnegative");
    }
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.threads = static_cast<int>(run.integer("threads", 1));

    const Section pot(root, "potential", {"polynomial", "anchors"});
    cfg.polynomial = pot.text("polynomial", "");
    for (const auto& item : split_any(pot.text("anchors", ""), "|")) {
        cfg.anchors.push_back(parse_point("potential.anchors", trim(item)));
    }
    for (const auto& name : radial_sections) {
        const Section rs(root, name, {"center", "coefs"});
        if (!rs.has("center") || !rs.has("coefs")) {
            throw ConfigError("[" + name + "] needs center and coefs");
        }
        cfg.radial.push_back({parse_point(rs.label("center"), rs.text("center", "")), rs.list("coefs")});
    }

    const Section cl(root, "cluster", {"sizes", "seeds", "init_scale", "tol"});
    for (double v : cl.list("sizes")) {
        if (v != std::floor(v)) {
            throw ConfigError("cluster.sizes must be integers");
        }
        cfg.cluster_sizes.push_back(static_cast<int>(v));
    }
    cfg.seeds = static_cast<int>(cl.integer("seeds", cfg.seeds));
    cfg.init_scale = cl.number("init_scale", cfg.init_scale);
    cfg.cluster_tol = cl.number("tol", cfg.cluster_tol);

    const Section dom(root, "domain", {"center", "half_width", "nodes"});
    cfg.domain_center = dom.has("center") ? parse_point("domain.center", dom.text("center", ""))
                                          : Point::Zero(std::max(cfg.n, 0));
    cfg.half_width = dom.number("half_width", cfg.half_width);
    cfg.nodes = static_cast<int>(dom.integer("nodes", cfg.nodes));

    const Section sch(root, "schedule", {"eps"});
    cfg.schedule = sch.list("eps");

    const Section ver(root, "verify", {"eps", "lambda", "alpha"});
    cfg.verify_eps = ver.number("eps", cfg.verify_eps);
    cfg.verify_lambda = ver.list("lambda");
    cfg.verify_alpha = ver.number("alpha", cfg.verify_alpha);

    const Section con(root, "construct", {"balancing"});
    cfg.balancing = con.boolean("balancing", cfg.balancing);

    const Section sw(root, "sweep", {"mode", "block", "balancing"});
    const std::string mode = sw.text("mode", "pde");
    if (mode == "pde") {
        cfg.sweep_mode = SweepMode::Pde;
    } else if (mode == "analytic") {
        cfg.sweep_mode = SweepMode::Analytic;
    } else {
        throw ConfigError("sweep.mode must be pde or analytic");
    }
    cfg.sweep_block = static_cast<int>(sw.integer("block", 0));
    cfg.sweep_balancing = sw.boolean("balancing", false);

    const Section tol(root, "tolerances",
                      {"mu", "newton_tol", "linear_tol", "max_lambda_h", "projection_max_lambda_h"});
    cfg.mu = tol.number("mu", cfg.mu);
    cfg.newton_tol = tol.number("newton_tol", cfg.newton_tol);
    cfg.linear_tol = tol.number("linear_tol", cfg.linear_tol);
    cfg.max_lambda_h = tol.number("max_lambda_h", cfg.max_lambda_h);
    cfg.projection_max_lambda_h = tol.number("projection_max_lambda_h", cfg.projection_max_lambda_h);

    const Section out(root, "output", {"dir"});
    cfg.output_dir = out.text("dir", cfg.output_dir);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ExperimentConfig minimal_config(int n) {
    ExperimentConfig cfg;
    cfg.n = n;
    cfg.domain_center = Point::Zero(std::max(n, 0));
    return cfg;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Constants:
            return "constants";
        case Stage::Cluster:
            return "cluster";
        case Stage::Construct:
            return "construct";
        case Stage::VerifyExpansions:
            return "verify-expansions";
        case Stage::Sweep:
            return "sweep";
        case Stage::All:
            return "all";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& s) {
    for (Stage st : {Stage::Constants, Stage::Cluster, Stage::Construct, Stage::VerifyExpansions, Stage::Sweep,
                     Stage::All}) {
        if (to_string(st) == s) {
            return st;
        }
    }
    throw ConfigError("unknown stage '" + s + "'");
}

void validate_config(const ExperimentConfig& cfg, Stage stage) {
    if (cfg.n < 3 || cfg.n > 6) {
        throw ConfigError("run.n must lie in 3..6");
    }
    if (cfg.threads < 1) {
        throw ConfigError("run.threads must be at least 1");
    }
    if (stage == Stage::Constants) {
        return;
    }
    if (cfg.n == 3) {
        throw ConfigError("dimension 3 is outside the theorem scope; only the constants stage accepts it");
    }
    if (cfg.anchors.empty()) {
        throw ConfigError("potential.anchors is empty");
    }
    for (const auto& b : cfg.anchors) {
        if (b.size() != cfg.n) {
            throw ConfigError("potential.anchors: every anchor needs " + std::to_string(cfg.n) + " coordinates");
        }
    }
    for (const auto& t : cfg.radial) {
        if (t.center.size() != cfg.n || t.coefs.empty()) {
            throw ConfigError("radial term needs a center of dimension n and at least one coefficient");
        }
    }
    PotentialSpec V;
    try {
        V = cfg.potential();
        V.validate_anchors();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("potential: ") + e.what());
    }
    if (cfg.cluster_sizes.size() != cfg.anchors.size()) {
        throw ConfigError("cluster.sizes needs one entry per anchor");
    }
    for (int N : cfg.cluster_sizes) {
        if (N < 1) {
            throw ConfigError("cluster.sizes entries must be at least 1");
        }
    }
    if (cfg.seeds < 1 || !(cfg.init_scale > 0.0) || !(cfg.cluster_tol > 0.0)) {
        throw ConfigError("cluster.seeds, init_scale and tol must be positive");
    }
    if (!(cfg.mu > 0.0) || !(cfg.newton_tol > 0.0) || !(cfg.linear_tol > 0.0) || !(cfg.max_lambda_h > 0.0) ||
        !(cfg.projection_max_lambda_h > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (stage == Stage::Cluster) {
        return;
    }

    if (cfg.domain_center.size() != cfg.n) {
        throw ConfigError("domain.center needs " + std::to_string(cfg.n) + " coordinates");
    }
    if (!(cfg.half_width > 0.0) || cfg.nodes < 3) {
        throw ConfigError("domain needs half_width > 0 and nodes >= 3");
    }
    DomainGrid grid;
    try {
        grid = experiment_grid(cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("domain: ") + e.what());
    }
    for (std::size_t k = 0; k < cfg.anchors.size(); ++k) {
        if (!(grid.distance_to_boundary(cfg.anchors[k]) > 0.0)) {
            throw ConfigError("anchor " + std::to_string(k) + " lies outside the domain");
        }
    }

    const bool uses_schedule = stage == Stage::Construct || stage == Stage::Sweep || stage == Stage::All;
    if (uses_schedule) {
        if (cfg.schedule.empty()) {
            throw ConfigError("schedule.eps is empty");
        }
        for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
            const double e = cfg.schedule[k];
            if (!(e > 0.0) || !(e < cfg.mu)) {
                throw ConfigError("schedule.eps entries must lie in (0, mu)");
            }
            if (k > 0 && !(e < cfg.schedule[k - 1])) {
                throw ConfigError("schedule.eps must be strictly decreasing");
            }
        }
    }
    if (stage == Stage::Sweep || stage == Stage::All) {
        if (cfg.sweep_block < 0 || cfg.sweep_block >= static_cast<int>(cfg.anchors.size())) {
            throw ConfigError("sweep.block must index an anchor");
        }
    }
    if (stage == Stage::VerifyExpansions || stage == Stage::All) {
        if (cfg.verify_lambda.empty()) {
            throw ConfigError("verify.lambda is empty");
        }
        if (!(cfg.verify_eps >= 0.0) || !(cfg.verify_eps < cfg.mu)) {
            throw ConfigError("verify.eps must lie in [0, mu)");
        }
        const auto proj = projection_settings(cfg);
        const double d0 = default_d0(grid);
        for (const auto& b : cfg.anchors) {
            for (double lambda : cfg.verify_lambda) {
                const auto s = verification_state(cfg, b, lambda);
                try {
                    s.validate();
                    check_representable(grid, s.bubbles.front(), proj);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError("verify state lambda = " + num(lambda) + ": " + e.what());
                }
                const auto why = membership_violation(s, cfg.mu, &grid, d0);
                if (!why.empty()) {
                    throw ConfigError("verify state lambda = " + num(lambda) + " is outside O(N, mu): " + why);
                }
            }
        }
    }
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(cfg.canonical().dump()); }

nlohmann::json version_info() {
    return {{"bubblecluster", BUBBLECLUSTER_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__},
            {"cxx_standard", __cplusplus}};
}

RunResult run_experiment(const ExperimentConfig& cfg, Stage stage) {
    RunResult result;
    try {
        validate_config(cfg, stage);
    } catch (const ConfigError& e) {
        result.exit_code = 1;
        result.message = e.what();
        return result;
    }
    result.config_hash = config_hash(cfg);
    const std::string& hash = result.config_hash;
    const fs::path dir(cfg.output_dir);
    const std::string started = iso_timestamp();

    try {
        fs::create_directories(dir);
    } catch (const fs::filesystem_error& e) {
        result.exit_code = 1;
        result.message = std::string("cannot create output directory: ") + e.what();
        return result;
    }

    auto emit = [&](const std::string& name, const std::string& body) {
        write_text(dir / name, body);
        result.files.push_back(name);
    };

    AsymptoticConstants c;
    std::vector<CriticalPointCertificate> selected;
    const PotentialSpec V = stage == Stage::Constants ? PotentialSpec(cfg.n) : cfg.potential();

    auto run_stage = [&](Stage s, const std::function<std::string()>& body) {
        if (!needs(stage, s) || result.exit_code != 0) {
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        StageTiming timing{to_string(s), 0.0, "ok", ""};
        try {
            timing.note = body();
            if (timing.note.rfind("refused", 0) == 0) {
                timing.status = "refused";
            }
        } catch (const std::exception& e) {
            timing.status = "failed";
            timing.note = e.what();
            result.exit_code = 2;
            result.failed_stage = to_string(s);
            result.message = e.what();
        }
        timing.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.timings.push_back(timing);
    };

    run_stage(Stage::Constants, [&]() -> std::string {
        c = compute_constants(cfg.n);
        const auto check = compute_constants(cfg.n, {}, QuadratureScheme::ExpSinh);
        auto j = to_json(c);
        j["config_hash"] = hash;
        j["cross_check"] = {{"scheme", "exp_sinh"},
                            {"max_relative_disagreement", constants_scheme_disagreement(c, check)}};
        emit("constants.json", j.dump(2) + "\n");
        return "";
    });

    run_stage(Stage::Cluster, [&]() -> std::string {
        auto anchors = nlohmann::json::array();
        for (std::size_t k = 0; k < cfg.anchors.size(); ++k) {
            MultistartSettings ms;
            ms.seeds = cfg.seeds;
            ms.rng_seed = cfg.seed + 0x9e3779b97f4a7c15ULL * k;
            ms.init_scale = cfg.init_scale;
            ms.threads = cfg.threads;
            ms.newton.tol = cfg.cluster_tol;
            const auto anchor = V.anchor(k);
            const auto certs = multistart_search(anchor, cfg.cluster_sizes[k], ms);
            auto list = nlohmann::json::array();
            for (const auto& cert : certs) {
                list.push_back(to_json(cert));
            }
            std::vector<std::vector<double>> H;
            for (int r = 0; r < anchor.H.rows(); ++r) {
                H.push_back(to_vec(anchor.H.row(r).transpose()));
            }
            anchors.push_back({{"index", k},
                               {"b", to_vec(anchor.b)},
                               {"N", cfg.cluster_sizes[k]},
                               {"hessian", H},
                               {"certificates", list},
                               {"selected", certs.empty() ? nlohmann::json(nullptr) : nlohmann::json(0)}});
            if (!certs.empty()) {
                selected.push_back(certs.front());
            }
        }
        emit("certificates.json",
             nlohmann::json{{"config_hash", hash}, {"anchors", anchors}}.dump(2) + "\n");
        if (selected.size() != cfg.anchors.size()) {
            throw StageFailure("no nondegenerate critical point of F found for anchor " +
                               std::to_string(selected.size()));
        }
        return "";
    });

    run_stage(Stage::Construct, [&]() -> std::string {
        const DomainGrid grid = experiment_grid(cfg);
        ConstructorSettings cs;
        cs.mu = cfg.mu;
        cs.grid = &grid;
        std::vector<BlockSpec> blocks;
        for (std::size_t k = 0; k < cfg.anchors.size(); ++k) {
            blocks.push_back({cfg.anchors[k], selected[k].zbar});
        }
        auto steps = nlohmann::json::array();
        for (double eps : cfg.schedule) {
            const auto mb = multi_block_predict(c, V, blocks, eps, cs);
            nlohmann::json step{{"eps", eps}, {"prediction", to_json(mb)}};
            if (cfg.balancing) {
                auto bal = nlohmann::json::array();
                for (const auto& blk : blocks) {
                    BalancingSettings bs;
                    bs.constructor = cs;
                    try {
                        bal.push_back(to_json(solve_balancing(c, V, blk.b, blk.zbar, eps, bs)));
                    } catch (const ConvergenceError& e) {
                        throw StageFailure("balancing system at eps = " + num(eps) + ": " + e.what());
                    }
                }
                step["balancing"] = bal;
            }
            steps.push_back(step);
        }
        auto c10 = nlohmann::json::array();
        for (const auto& b : cfg.anchors) {
            c10.push_back(constant_c10(c, V.value(b)));
        }
        emit("predictions.json",
             nlohmann::json{{"config_hash", hash}, {"c10", c10}, {"steps", steps}}.dump(2) + "\n");
        return "";
    });

    run_stage(Stage::VerifyExpansions, [&]() -> std::string {
        const DomainGrid grid = experiment_grid(cfg);
        const DiscreteOperator op(grid, V);
        ExpansionSettings es;
        es.mu = cfg.mu;
        es.projection = projection_settings(cfg);
        std::ostringstream csv;
        csv << "anchor,lambda,eps,alpha,kind,i,component,numeric,predicted,remainder,budget,ratio,config_hash\n";
        for (std::size_t k = 0; k < cfg.anchors.size(); ++k) {
            for (double lambda : cfg.verify_lambda) {
                const auto s = verification_state(cfg, cfg.anchors[k], lambda);
                for (const auto& r : verify_expansions(op, c, s, es)) {
                    for (Eigen::Index comp = 0; comp < r.numeric.size(); ++comp) {
                        csv << k << ',' << num(lambda) << ',' << num(s.eps) << ',' << num(cfg.verify_alpha) << ','
                            << to_string(r.kind) << ',' << r.index << ',' << comp << ',' << num(r.numeric[comp])
                            << ',' << num(r.predicted[comp]) << ',' << num(r.remainder[comp]) << ','
                            << num(r.budget_value) << ',' << num(r.ratio) << ',' << hash << '\n';
                    }
                }
            }
        }
        emit("expansion_reports.csv", csv.str());
        return "";
    });

    run_stage(Stage::Sweep, [&]() -> std::string {
        const std::size_t k = static_cast<std::size_t>(cfg.sweep_block);
        const Point& b = cfg.anchors[k];
        const auto& zbar = selected[k].zbar;
        SweepTable table;
        if (cfg.sweep_mode == SweepMode::Analytic) {
            ConstructorSettings cs;
            cs.mu = cfg.mu;
            table = analytic_sweep(c, V, b, zbar, cfg.schedule, cfg.sweep_balancing, cs);
        } else {
            const DomainGrid grid = experiment_grid(cfg);
            const DiscreteOperator op(grid, V);
            ConstructorSettings cs;
            cs.mu = cfg.mu;
            cs.grid = &grid;
            const auto pred0 = predicted_parameters(c, V, b, zbar, cfg.schedule.front(), cs);
            SweepSettings ss;
            ss.mu = cfg.mu;
            ss.max_lambda_h = cfg.max_lambda_h;
            ss.newton.mu = cfg.mu;
            ss.newton.tol = cfg.newton_tol;
            ss.newton.linear_tol = cfg.linear_tol;
            ss.projection = projection_settings(cfg);
            table = continuation_sweep(op, c, pred0, cfg.schedule, ss);
        }
        for (auto& row : table.rows) {
            row.block = static_cast<int>(k);
        }
        std::ostringstream csv;
        write_sweep_csv(csv, table, hash);
        emit("sweep.csv", csv.str());

        nlohmann::json summary{{"config_hash", hash},
                               {"mode", cfg.sweep_mode == SweepMode::Pde ? "pde" : "analytic"},
                               {"block", k},
                               {"table", to_json(table)}};
        if (table.eps_done.size() >= 3) {
            summary["fit"] = to_json(fit_scaling_law(table));
        }
        emit("sweep_summary.json", summary.dump(2) + "\n");

        if (!table.complete) {
            if (table.stop_reason.rfind("grid cap", 0) == 0) {
                return "refused: " + table.stop_reason;
            }
            throw StageFailure(table.stop_reason);
        }
        return "";
    });

    auto timings = nlohmann::json::array();
    for (const auto& t : result.timings) {
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}, {"status", t.status}, {"note", t.note}});
    }
    nlohmann::json manifest{{"config_hash", hash},
                            {"config", cfg.canonical()},
                            {"stage", to_string(stage)},
                            {"threads", cfg.threads},
                            {"started", started},
                            {"finished", iso_timestamp()},
                            {"versions", version_info()},
                            {"timings", timings},
                            {"exit_code", result.exit_code},
                            {"failed_stage", result.failed_stage},
                            {"message", result.message},
                            {"outputs", result.files}};
    try {
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");
        result.files.push_back("manifest.json");
    } catch (const std::exception& e) {
        if (result.exit_code == 0) {
            result.exit_code = 2;
            result.failed_stage = "manifest";
            result.message = e.what();
        }
    }
    return result;
}

} // namespace bubblecluster
