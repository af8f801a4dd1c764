#pragma once

#include "bubblecluster/analytic.hpp"
#include "bubblecluster/potential.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bubblecluster {

/// Thrown for malformed or inconsistent experiment configs. The CLI maps
/// it to exit code 1 before any output is written.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SweepMode { Pde, Analytic };

/// Parsed experiment config. See configs/*.ini for the file format.
struct ExperimentConfig {
    int n = 4;
    std::uint64_t seed = 0;
    int threads = 1;

    /// [potential]
    std::string polynomial;
    std::vector<RadialTerm> radial;
    std::vector<Point> anchors;

    /// [cluster] N per anchor and multistart settings.
    std::vector<int> cluster_sizes;
    int seeds = 32;
    double init_scale = 1.0;
    double cluster_tol = 1e-11;

    /// [domain] a cube of half-width `half_width` around `center`.
    Point domain_center;
    double half_width = 1.0;
    int nodes = 17;

    /// [schedule] strictly decreasing eps values.
    std::vector<double> schedule;

    /// [verify] single-bubble states at every anchor.
    double verify_eps = 0.05;
    std::vector<double> verify_lambda;
    double verify_alpha = 1.0;

    /// [construct]
    bool balancing = true;

    /// [sweep]
    SweepMode sweep_mode = SweepMode::Pde;
    int sweep_block = 0;
    bool sweep_balancing = false;

    /// [tolerances]
    double mu = 0.5;
    double newton_tol = 1e-9;
    double linear_tol = 1e-10;
    double max_lambda_h = 1.0;
    double projection_max_lambda_h = 0.5;

    /// [output]
    std::string output_dir = "out";

    /// Polynomial and radial terms with the declared anchors.
    PotentialSpec potential() const;
    /// Canonical form used for hashing. Excludes the output directory and
    /// the thread count, which do not change results.
    nlohmann::json canonical() const;
};

/// Parses INI text. Unknown sections and keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Config with only the dimension set (used by `constants --n`).
ExperimentConfig minimal_config(int n);

/// Stages in pipeline order.
enum class Stage { Constants, Cluster, Construct, VerifyExpansions, Sweep, All };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

/// Checks everything a stage needs before computing: dimensions, anchor
/// criticality, schedule ordering, grid representability and membership
/// of the verification states. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg, Stage stage);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string config_hash(const ExperimentConfig& cfg);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
    std::string status;  ///< "ok", "refused" (grid cap) or "failed"
    std::string note;
};

struct RunResult {
    int exit_code = 0;
    std::string failed_stage;  ///< empty unless exit_code == 2
    std::string message;
    std::string config_hash;
    std::vector<std::string> files;  ///< written, relative to the output directory
    std::vector<StageTiming> timings;
};

/// Runs `stage` and its prerequisites, writing outputs under
/// `cfg.output_dir`. Validation failures return exit code 1 and write
/// nothing; numerical failures return exit code 2 with the stage named and
/// keep the outputs of the stages that finished.
RunResult run_experiment(const ExperimentConfig& cfg, Stage stage);

/// Project, compiler and library versions recorded in the manifest.
nlohmann::json version_info();

} // namespace bubblecluster
