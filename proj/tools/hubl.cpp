// hubl: generate -> relabel -> solve -> analyze -> sweep driver.
//
// Exit codes: 0 success, 1 unexpected failure, 2 config/validation error,
// 3 IO error, 4 failed check in analyze.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hubl/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitCheckFailed = 4;

} // namespace

int main(int argc, char** argv) {
    namespace pl = hubl::pipeline;

    CLI::App app{"Heuristic blending for tabular offline RL"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    app.add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    app.add_option("-o,--out", out_flag, "Output directory (overrides HUBL_OUT and the config)");

    auto* gen = app.add_subcommand("generate", "Roll out the behavior policy and write trajectories");
    std::optional<std::uint64_t> gen_seed;
    std::optional<std::size_t> gen_n_traj;
    gen->add_option("--seed", gen_seed, "Rollout seed");
    gen->add_option("--n-traj", gen_n_traj, "Number of trajectories");

    auto* rel = app.add_subcommand("relabel", "Relabel a trajectory file into (r~, gamma~) tuples");
    std::string rel_input;
    std::optional<std::string> rel_strategy;
    std::optional<double> rel_alpha;
    bool rel_ablation = false;
    std::string rel_format = "jsonl";
    rel->add_option("-i,--input", rel_input, "Trajectory JSONL file")->required();
    rel->add_option("--strategy", rel_strategy, "constant|sigmoid|rank")
        ->check(CLI::IsMember({"constant", "sigmoid", "rank"}));
    rel->add_option("--alpha", rel_alpha, "Blending scale in [0, 1]");
    rel->add_flag("--ablation", rel_ablation, "Shrink the discount only (r~ = r)");
    rel->add_option("--format", rel_format, "jsonl|csv")->check(CLI::IsMember({"jsonl", "csv"}));

    auto* sol = app.add_subcommand("solve", "Run VI-LCB on trajectories or relabeled tuples");
    std::string sol_input;
    std::optional<double> sol_alpha;
    std::optional<std::uint64_t> sol_seed;
    bool sol_baseline = false;
    sol->add_option("-i,--input", sol_input, "Trajectory JSONL, tuple JSONL or tuple CSV")->required();
    sol->add_option("--alpha", sol_alpha, "Blending constant in [0, 1]");
    sol->add_option("--seed", sol_seed, "Solver seed");
    sol->add_flag("--baseline", sol_baseline, "Plain VI-LCB without blending");

    auto* ana = app.add_subcommand("analyze", "Check the decomposition, lemmas and bounds");

    auto* swp = app.add_subcommand("sweep", "Grid over N x alpha x strategy x seed");
    std::optional<std::size_t> swp_workers;
    swp->add_option("--workers", swp_workers, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        auto cfg = pl::load_config_file(config_path);
        const auto out_dir = pl::resolve_output_dir(cfg, out_flag.empty() ? std::nullopt : std::optional(out_flag));

        if (*gen) {
            if (gen_seed) {
                cfg.seed = *gen_seed;
                cfg.canonical["seed"] = *gen_seed;
            }
            if (gen_n_traj) {
                if (*gen_n_traj < 1) throw hubl::ValidationError("n_traj: must be at least 1");
                cfg.n_traj = *gen_n_traj;
                cfg.canonical["n_traj"] = *gen_n_traj;
            }
            const auto r = pl::cmd_generate(cfg, out_dir);
            std::cout << "wrote " << r.dataset.string() << " (N=" << r.n_transitions
                      << ", support=" << r.support_size << ")\n";
        } else if (*rel) {
            pl::RelabelOptions opts;
            opts.strategy = cfg.relabel;
            if (rel_strategy) opts.strategy.kind = hubl::parse_blend_kind(*rel_strategy);
            if (rel_alpha) opts.strategy.alpha = *rel_alpha;
            opts.strategy.validate();
            opts.ablation = rel_ablation;
            opts.csv = rel_format == "csv";
            const auto r = pl::cmd_relabel(cfg, rel_input, opts, out_dir);
            std::cout << "wrote " << r.tuples.string() << " (" << r.n_tuples << " tuples)\n";
            if (r.missing_bootstrap > 0)
                std::cerr << "warning: " << r.missing_bootstrap
                          << " timeout trajectories had no bootstrap value; used 0\n";
        } else if (*sol) {
            pl::SolveOptions opts{sol_alpha.value_or(cfg.solver.alpha), sol_seed.value_or(cfg.solver.seed),
                                  sol_baseline || cfg.solver.baseline};
            if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) throw hubl::ValidationError("alpha: must lie in [0, 1]");
            const auto r = pl::cmd_solve(cfg, sol_input, opts, out_dir);
            std::cout << "wrote " << r.policy.string() << " (T=" << r.result.T << ", gap=" << r.eval.gap << ")\n";
        } else if (*ana) {
            const auto r = pl::cmd_analyze(cfg, out_dir);
            std::cout << "wrote " << r.report.string() << " (" << (r.passed ? "all checks passed" : "FAILED")
                      << ")\n";
            if (!r.passed) return kExitCheckFailed;
        } else if (*swp) {
            const auto r = pl::cmd_sweep(cfg, out_dir, swp_workers);
            std::cout << "wrote " << r.csv.string() << " (" << r.rows.size() << " rows, " << r.computed
                      << " computed, " << r.reused << " reused)\n";
        }
    } catch (const hubl::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const hubl::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
