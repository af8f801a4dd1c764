#include "bubblecluster/experiment.hpp"

#include <doctest.h>

using namespace bubblecluster;

namespace {

const char* kPair = R"(
; comment line
[run]
n = 4
seed = 3

[potential]
polynomial = 2:0000, -0.5:2000, 0.5:0200, 0.5:0020, 0.5:0002
anchors = 0 0 0 0

[cluster]
sizes = 2

[domain]
half_width = 1.5   ; trailing comment
nodes = 25

[schedule]
eps = 0.1, 0.05
)";

} // namespace

TEST_CASE("FNV-1a reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("parse_config reads sections and defaults") {
    const auto cfg = parse_config(kPair);
    CHECK(cfg.n == 4);
    CHECK(cfg.seed == 3);
    CHECK(cfg.anchors.size() == 1);
    CHECK(cfg.cluster_sizes == std::vector<int>{2});
    CHECK(cfg.half_width == 1.5);
    CHECK(cfg.schedule == std::vector<double>{0.1, 0.05});
    CHECK(cfg.sweep_mode == SweepMode::Pde);
    CHECK_NOTHROW(validate_config(cfg, Stage::Construct));
    CHECK(cfg.potential().hessian(cfg.anchors[0])(0, 0) == -1.0);
}

TEST_CASE("parse_config reads radial sections") {
    const auto cfg = parse_config(std::string(kPair) + R"(
[radial.0]
center = 0 0 0 0
coefs = 0 0.1
)");
    REQUIRE(cfg.radial.size() == 1);
    CHECK(cfg.radial[0].center.size() == 4);
    CHECK(cfg.radial[0].coefs == std::vector<double>{0.0, 0.1});
    // 0.1 |x|^2 adds 0.2 to every diagonal Hessian entry.
    CHECK(cfg.potential().hessian(cfg.anchors[0])(0, 0) == doctest::Approx(-0.8));
    CHECK(config_hash(cfg) != config_hash(parse_config(kPair)));
    CHECK_THROWS_AS(parse_config(std::string(kPair) + "[radial.1]\ncenter = 0 0 0 0\n"), ConfigError);
}

TEST_CASE("config hash ignores output and threads but not the seed") {
    auto a = parse_config(kPair);
    auto b = a;
    b.output_dir = "elsewhere";
    b.threads = 4;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 4;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("validation rejects inconsistent configs") {
    CHECK_THROWS_AS(parse_config("[run]\nn = 4\n[potential]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[domain]\nnodes = 5\n"), ConfigError);

    auto cfg = parse_config(kPair);
    cfg.schedule = {0.05, 0.1};
    CHECK_THROWS_AS(validate_config(cfg, Stage::Construct), ConfigError);
    CHECK_NOTHROW(validate_config(cfg, Stage::Cluster));

    cfg = parse_config(kPair);
    cfg.cluster_sizes = {2, 2};
    CHECK_THROWS_AS(validate_config(cfg, Stage::Cluster), ConfigError);

    cfg = parse_config(kPair);
    cfg.verify_lambda = {40.0};
    CHECK_THROWS_AS(validate_config(cfg, Stage::VerifyExpansions), ConfigError);

    cfg = parse_config(kPair);
    cfg.n = 3;
    CHECK_NOTHROW(validate_config(cfg, Stage::Constants));
    CHECK_THROWS_AS(validate_config(cfg, Stage::Cluster), ConfigError);
    CHECK_THROWS_AS(stage_from_string("verify"), ConfigError);
}

TEST_CASE("run_experiment refuses invalid configs before writing") {
    auto cfg = parse_config(kPair);
    cfg.schedule = {};
    cfg.output_dir = "never_created_dir_for_test";
    const auto r = run_experiment(cfg, Stage::All);
    CHECK(r.exit_code == 1);
    CHECK(r.files.empty());
}
