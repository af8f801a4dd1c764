#include "bubblecluster/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace bubblecluster;

int main(int argc, char** argv) {
    CLI::App app{"Bubble-cluster experiments: constants, cluster certificates, predictions, "
                 "expansion audits and eps sweeps"};
    app.set_version_flag("--version", version_info().dump());

    std::string stage_arg;
    std::string stage_flag;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> n;
    std::string out_dir;

    app.add_option("command", stage_arg,
                   "constants | cluster | construct | verify-expansions | sweep | all");
    app.add_option("--stage", stage_flag, "Same as the positional stage");
    app.add_option("--config", config_path, "INI experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Overrides run.seed");
    app.add_option("--threads", threads, "Overrides run.threads")->check(CLI::PositiveNumber);
    app.add_option("--n", n, "Dimension (overrides run.n; enough on its own for `constants`)");
    app.add_option("--out", out_dir, "Output directory (overrides output.dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!stage_arg.empty() && !stage_flag.empty() && stage_arg != stage_flag) {
            throw ConfigError("positional stage '" + stage_arg + "' disagrees with --stage '" + stage_flag + "'");
        }
        const std::string stage_name = !stage_arg.empty() ? stage_arg : (!stage_flag.empty() ? stage_flag : "all");
        const Stage stage = stage_from_string(stage_name);

        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config(config_path);
            if (n) {
                cfg.n = *n;
            }
        } else if (stage == Stage::Constants && n) {
            cfg = minimal_config(*n);
        } else {
            throw ConfigError("--config is required (only `constants --n N` runs without one)");
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (threads) {
            cfg.threads = *threads;
        }
        if (!out_dir.empty()) {
            cfg.output_dir = out_dir;
        }

        const RunResult r = run_experiment(cfg, stage);
        if (r.exit_code == 1) {
            std::cerr << "bubblecluster: invalid config: " << r.message << "\n";
            return 1;
        }
        for (const auto& t : r.timings) {
            std::cerr << "[" << t.stage << "] " << t.status << " in " << t.seconds << " s"
                      << (t.note.empty() ? "" : ": " + t.note) << "\n";
        }
        if (r.exit_code == 2) {
            std::cerr << "bubblecluster: stage '" << r.failed_stage << "' failed: " << r.message << "\n";
            return 2;
        }
        std::cout << "config " << r.config_hash << " -> " << cfg.output_dir << "\n";
        for (const auto& f : r.files) {
            std::cout << "  " << f << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "bubblecluster: invalid config: " << e.what() << "\n";
        return 1;
    }
}
