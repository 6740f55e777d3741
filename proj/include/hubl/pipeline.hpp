#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hubl/analysis.hpp"
#include "hubl/dataset.hpp"
#include "hubl/generators.hpp"
#include "hubl/io.hpp"
#include "hubl/relabel.hpp"
#include "hubl/vilcb.hpp"

namespace hubl::pipeline {

namespace fs = std::filesystem;

struct SolverSettings {
    double alpha = 0.1;
    std::uint64_t seed = 0;
    std::optional<double> v_max;
    bool baseline = false;
};

struct SweepSettings {
    std::vector<std::size_t> n_list;
    std::vector<double> alpha_list;
    std::vector<std::string> strategy_list;
    std::vector<std::uint64_t> seed_list;
    std::size_t workers = 1;
};

/// Parsed run configuration. `canonical` is the normalized JSON used for
/// the config hash; it has the MDP inlined.
struct RunConfig {
    TabularMdp mdp = benchmark_mdp();
    BehaviorKind behavior = BehaviorKind::noisy_expert;
    double epsilon = 0.3;
    std::size_t n_traj = 100;
    std::size_t max_len = 20;
    std::vector<std::size_t> terminal_states;
    std::uint64_t seed = 0;
    BlendingStrategy relabel{BlendKind::constant, 0.1};
    SolverSettings solver;
    SweepSettings sweep;
    std::string output_dir = "hubl_out";
    Json canonical;

    std::string hash() const { return config_hash(canonical); }
    Policy behavior_policy() const { return make_behavior(mdp, behavior, epsilon); }
    double v_max() const { return solver.v_max.value_or(mdp.v_max()); }
};

namespace detail {

using hubl::detail::field;
using hubl::detail::get_as;

template <typename T>
T opt(const Json& obj, const char* name, T fallback, const std::string& prefix) {
    if (!obj.contains(name)) return fallback;
    return get_as<T>(obj.at(name), prefix + name);
}

inline std::size_t opt_count(const Json& obj, const char* name, std::size_t fallback, const std::string& prefix) {
    if (!obj.contains(name)) return fallback;
    const auto& j = obj.at(name);
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ValidationError(prefix + name + ": expected a nonnegative integer");
    return j.get<std::size_t>();
}

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (auto k : allowed) ok = ok || it.key() == k;
        if (!ok) throw ValidationError(where + "unknown field '" + it.key() + "'");
    }
}

inline void check_strategy_name(const std::string& name) {
    if (name != "lcb") parse_blend_kind(name);
}

} // namespace detail

/// Builds a RunConfig from JSON; relative mdp_file paths resolve against base_dir.
inline RunConfig load_config(const Json& j, const fs::path& base_dir = {}) {
    using namespace detail;
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    check_keys(j,
               {"mdp", "mdp_file", "behavior", "n_traj", "max_len", "terminal_states", "seed", "relabel", "solver",
                "sweep", "output_dir"},
               "config: ");
    RunConfig cfg;

    if (j.contains("mdp") && j.contains("mdp_file")) throw ValidationError("mdp: give either mdp or mdp_file");
    if (j.contains("mdp_file")) {
        fs::path p = get_as<std::string>(j.at("mdp_file"), "mdp_file");
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        if (!fs::exists(p)) throw IoError("mdp_file: '" + p.string() + "' does not exist");
        cfg.mdp = mdp_from_json(parse_json(read_file(p), p.string()));
    } else if (j.contains("mdp")) {
        const auto& m = j.at("mdp");
        if (m.is_string()) {
            if (m.get<std::string>() != "benchmark") throw ValidationError("mdp: expected \"benchmark\" or an object");
        } else {
            cfg.mdp = mdp_from_json(m);
        }
    }

    if (j.contains("behavior")) {
        const auto& b = j.at("behavior");
        check_keys(b, {"kind", "epsilon"}, "behavior: ");
        cfg.behavior = parse_behavior_kind(opt<std::string>(b, "kind", "noisy_expert", "behavior."));
        cfg.epsilon = opt<double>(b, "epsilon", cfg.epsilon, "behavior.");
        if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw ValidationError("behavior.epsilon: must lie in [0, 1]");
    }
    cfg.n_traj = opt_count(j, "n_traj", cfg.n_traj, "");
    cfg.max_len = opt_count(j, "max_len", cfg.max_len, "");
    if (cfg.n_traj < 1) throw ValidationError("n_traj: must be at least 1");
    if (cfg.max_len < 1) throw ValidationError("max_len: must be at least 1");
    if (j.contains("terminal_states")) {
        cfg.terminal_states = get_as<std::vector<std::size_t>>(j.at("terminal_states"), "terminal_states");
        for (auto s : cfg.terminal_states)
            if (s >= cfg.mdp.n_states()) throw ValidationError("terminal_states: index out of range");
    }
    cfg.seed = opt<std::uint64_t>(j, "seed", 0, "");

    if (j.contains("relabel")) {
        const auto& r = j.at("relabel");
        check_keys(r, {"strategy", "alpha"}, "relabel: ");
        cfg.relabel.kind = parse_blend_kind(opt<std::string>(r, "strategy", "constant", "relabel."));
        cfg.relabel.alpha = opt<double>(r, "alpha", cfg.relabel.alpha, "relabel.");
        if (!(cfg.relabel.alpha >= 0.0 && cfg.relabel.alpha <= 1.0))
            throw ValidationError("relabel.alpha: must lie in [0, 1]");
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, {"alpha", "seed", "v_max", "baseline"}, "solver: ");
        cfg.solver.alpha = opt<double>(s, "alpha", cfg.solver.alpha, "solver.");
        cfg.solver.seed = opt<std::uint64_t>(s, "seed", 0, "solver.");
        cfg.solver.baseline = opt<bool>(s, "baseline", false, "solver.");
        if (s.contains("v_max") && !s.at("v_max").is_null()) cfg.solver.v_max = get_as<double>(s.at("v_max"), "solver.v_max");
        if (!(cfg.solver.alpha >= 0.0 && cfg.solver.alpha <= 1.0)) throw ValidationError("solver.alpha: must lie in [0, 1]");
        if (cfg.solver.v_max && !(*cfg.solver.v_max > 0.0)) throw ValidationError("solver.v_max: must be positive");
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        check_keys(s, {"n_list", "alpha_list", "strategy_list", "seed_list", "workers"}, "sweep: ");
        cfg.sweep.n_list = opt<std::vector<std::size_t>>(s, "n_list", {}, "sweep.");
        cfg.sweep.alpha_list = opt<std::vector<double>>(s, "alpha_list", {}, "sweep.");
        cfg.sweep.strategy_list = opt<std::vector<std::string>>(s, "strategy_list", {"lcb"}, "sweep.");
        cfg.sweep.seed_list = opt<std::vector<std::uint64_t>>(s, "seed_list", {}, "sweep.");
        cfg.sweep.workers = opt_count(s, "workers", 1, "sweep.");
        if (cfg.sweep.n_list.empty()) throw ValidationError("sweep.n_list: must be nonempty");
        if (cfg.sweep.alpha_list.empty()) throw ValidationError("sweep.alpha_list: must be nonempty");
        if (cfg.sweep.strategy_list.empty()) throw ValidationError("sweep.strategy_list: must be nonempty");
        if (cfg.sweep.seed_list.empty()) throw ValidationError("sweep.seed_list: must be nonempty");
        for (auto n : cfg.sweep.n_list)
            if (n < 1) throw ValidationError("sweep.n_list: entries must be at least 1");
        for (auto a : cfg.sweep.alpha_list)
            if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("sweep.alpha_list: entries must lie in [0, 1]");
        for (const auto& name : cfg.sweep.strategy_list) check_strategy_name(name);
        if (cfg.sweep.workers < 1) throw ValidationError("sweep.workers: must be at least 1");
    }
    cfg.output_dir = opt<std::string>(j, "output_dir", cfg.output_dir, "");

    cfg.canonical = j;
    cfg.canonical.erase("mdp_file");
    cfg.canonical.erase("output_dir");
    cfg.canonical["mdp"] = to_json(cfg.mdp);
    return cfg;
}

inline RunConfig load_config_file(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("config: '" + path.string() + "' does not exist");
    return load_config(parse_json(read_file(path), path.string()), path.parent_path());
}

/// Output directory: flag, then HUBL_OUT, then the config value.
inline fs::path resolve_output_dir(const RunConfig& cfg, const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("HUBL_OUT"); env && *env) return env;
    return cfg.output_dir;
}

inline Json manifest(const RunConfig& cfg, const std::string& kind, std::uint64_t seed) {
    return {{"kind", kind}, {"config_hash", cfg.hash()}, {"seed", seed}};
}

inline void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// ---- shared steps ----------------------------------------------------------

inline Dataset load_dataset(const RunConfig& cfg, const fs::path& path) {
    Dataset data;
    data.trajectories = trajectories_from_jsonl(read_file(path));
    check_dims(data.trajectories, cfg.mdp.n_states(), cfg.mdp.n_actions());
    data.gamma = cfg.mdp.gamma();
    data.rng_seed = cfg.seed;
    return data;
}

/// Monte-Carlo heuristics over the data; timeout tails bootstrap iteratively.
inline MonteCarloEstimate heuristics(const Dataset& data, std::size_t ns) {
    return mc_state_values_bootstrapped(data, ns, data.gamma);
}

/// h restricted to the support states (absent elsewhere).
inline PartialValueTable support_heuristic(const MonteCarloEstimate& mc, const SupportSet& support) {
    PartialValueTable h(support.n_states());
    const auto in = support.state_projection();
    for (std::size_t s = 0; s < support.n_states(); ++s)
        if (in[s]) h.set(s, mc.values.get(s).value_or(0.0));
    return h;
}

struct Evaluation {
    double v_pi = 0.0;
    double v_star = 0.0;
    double gap = 0.0;
};

inline Evaluation evaluate(const TabularMdp& mdp, const Policy& pi) {
    const auto d0 = mdp.initial_dist();
    Evaluation e;
    e.v_star = value_iteration(mdp, kAnalysisTolerance).values.dot(d0);
    e.v_pi = policy_evaluation(mdp, pi, kAnalysisTolerance).dot(d0);
    e.gap = e.v_star - e.v_pi;
    return e;
}

inline VilcbConfig solver_config(const RunConfig& cfg, double alpha, std::uint64_t seed) {
    VilcbConfig v;
    v.gamma = cfg.mdp.gamma();
    v.v_max = cfg.v_max();
    v.lambda_const = alpha;
    v.seed = seed;
    return v;
}

/// Solves from raw data: VI-LCB with blending, or plain VI-LCB when baseline.
inline VilcbResult solve_raw(const RunConfig& cfg, const Dataset& data, double alpha, std::uint64_t seed,
                             bool baseline) {
    const std::size_t ns = cfg.mdp.n_states(), na = cfg.mdp.n_actions();
    const auto tuples = flatten(data);
    const auto vc = solver_config(cfg, alpha, seed);
    if (baseline) return vi_lcb(tuples, ns, na, vc);
    const auto st = stats(tuples, ns, na);
    return vi_lcb_hubl(tuples, ns, na, vc, support_heuristic(heuristics(data, ns), st.support), st.support);
}

// ---- subcommands -----------------------------------------------------------

struct GenerateResult {
    fs::path dataset;
    fs::path manifest;
    std::size_t n_transitions = 0;
    std::size_t support_size = 0;
};

inline GenerateResult cmd_generate(const RunConfig& cfg, const fs::path& out_dir) {
    const auto data =
        rollout(cfg.mdp, cfg.behavior_policy(), cfg.max_len, cfg.n_traj, cfg.terminal_states, cfg.seed);
    const auto st = stats(data, cfg.mdp.n_states(), cfg.mdp.n_actions());
    GenerateResult r{out_dir / "dataset.jsonl", out_dir / "dataset.manifest.json", data.n_transitions(),
                     st.support.size()};
    write_file(r.dataset, trajectories_to_jsonl(data));
    auto m = manifest(cfg, "dataset", cfg.seed);
    m["n_traj"] = data.trajectories.size();
    m["N"] = r.n_transitions;
    m["support_size"] = r.support_size;
    m["gamma"] = data.gamma;
    write_json(r.manifest, m);
    return r;
}

struct RelabelOptions {
    BlendingStrategy strategy;
    bool ablation = false;
    bool csv = false;
};

struct RelabelOutput {
    fs::path tuples;
    fs::path manifest;
    std::size_t n_tuples = 0;
    std::size_t missing_bootstrap = 0;
};

inline RelabelOutput cmd_relabel(const RunConfig& cfg, const fs::path& dataset_path, const RelabelOptions& opts,
                                 const fs::path& out_dir) {
    const auto data = load_dataset(cfg, dataset_path);
    const auto mc = heuristics(data, cfg.mdp.n_states());
    const auto res = opts.ablation ? relabel_discount_only(data, opts.strategy, mc.values)
                                   : relabel(data, opts.strategy, mc.values);
    RelabelOutput r;
    r.tuples = out_dir / (opts.csv ? "tuples.csv" : "tuples.jsonl");
    r.manifest = out_dir / "tuples.manifest.json";
    r.n_tuples = res.tuples.size();
    r.missing_bootstrap = res.missing_bootstrap;
    write_file(r.tuples, opts.csv ? tuples_to_csv(res.tuples) : tuples_to_jsonl(res.tuples));
    auto m = manifest(cfg, "tuples", cfg.seed);
    m["strategy"] = to_string(opts.strategy.kind);
    m["alpha"] = opts.strategy.alpha;
    m["ablation"] = opts.ablation;
    m["N"] = r.n_tuples;
    m["missing_bootstrap"] = r.missing_bootstrap;
    m["source"] = dataset_path.filename().string();
    write_json(r.manifest, m);
    return r;
}

enum class InputKind { trajectories, tuples_jsonl, tuples_csv };

/// Sniffs the first nonblank line of a data file.
inline InputKind detect_input(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    if (line.rfind("s,a,s_next", 0) == 0) return InputKind::tuples_csv;
    const Json j = parse_json(line, "line 1");
    if (j.is_object() && j.contains("states")) return InputKind::trajectories;
    if (j.is_object() && j.contains("s")) return InputKind::tuples_jsonl;
    throw ValidationError("input: neither trajectories nor relabeled tuples");
}

struct SolveOptions {
    double alpha = 0.1;
    std::uint64_t seed = 0;
    bool baseline = false;
};

struct SolveOutput {
    fs::path policy;
    fs::path evaluation;
    VilcbResult result;
    Evaluation eval;
};

inline SolveOutput cmd_solve(const RunConfig& cfg, const fs::path& input, const SolveOptions& opts,
                             const fs::path& out_dir) {
    const std::size_t ns = cfg.mdp.n_states(), na = cfg.mdp.n_actions();
    const std::string text = read_file(input);
    SolveOutput out;
    const auto kind = detect_input(text);
    std::string mode;
    if (kind == InputKind::trajectories) {
        out.result = solve_raw(cfg, load_dataset(cfg, input), opts.alpha, opts.seed, opts.baseline);
        mode = opts.baseline ? "baseline" : "hubl";
    } else {
        auto tuples = kind == InputKind::tuples_csv ? tuples_from_csv(text) : tuples_from_jsonl(text);
        for (const auto& t : tuples)
            if (t.state >= ns || t.action >= na || t.next_state >= ns)
                throw ValidationError("tuples: state or action index out of range");
        out.result = vi_lcb_relabeled(tuples, ns, na, solver_config(cfg, opts.alpha, opts.seed));
        mode = "relabeled";
    }
    out.eval = evaluate(cfg.mdp, out.result.policy);

    out.policy = out_dir / "policy.json";
    out.evaluation = out_dir / "evaluation.json";
    Json p = to_json(out.result.policy);
    p["manifest"] = manifest(cfg, "policy", opts.seed);
    p["manifest"]["T"] = out.result.T;
    p["manifest"]["L"] = out.result.L;
    p["manifest"]["alpha"] = out.result.alpha;
    p["manifest"]["v_max"] = out.result.v_max;
    p["manifest"]["mode"] = mode;
    write_json(out.policy, p);
    Json e = {{"v_pi_d0", out.eval.v_pi}, {"v_star_d0", out.eval.v_star}, {"gap", out.eval.gap},
              {"manifest", manifest(cfg, "evaluation", opts.seed)}};
    write_json(out.evaluation, e);
    return out;
}

struct AnalyzeOutput {
    fs::path report;
    bool passed = false;
    Json json;
};

/**
 * Generates data from the config, solves it, and checks the decomposition,
 * the lemma suite and the bounds with h = V^mu on the behavior support.
 */
inline AnalyzeOutput cmd_analyze(const RunConfig& cfg, const fs::path& out_dir) {
    const auto& mdp = cfg.mdp;
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const auto mu = cfg.behavior_policy();
    const auto data = rollout(mdp, mu, cfg.max_len, cfg.n_traj, cfg.terminal_states, cfg.seed);
    const auto tuples = flatten(data);
    const auto st = stats(tuples, ns, na);
    const double alpha = cfg.solver.alpha;
    const auto solved = solve_raw(cfg, data, alpha, cfg.solver.seed, cfg.solver.baseline);

    const auto omega = SupportSet::of_policy(mu);
    const auto h = policy_evaluation(mdp, mu, kAnalysisTolerance);
    const std::vector<double> lam(ns, alpha);
    const auto dec = decomposition_check(mdp, h, lam, omega, solved.policy);
    const auto lem = lemma_suite(mdp, mu, h, alpha, omega);
    const auto bounds = evaluate_bounds(mdp, mu, h, alpha, omega, solved.policy, st.empirical_mu, tuples.size(),
                                        cfg.v_max());

    auto lemma_json = [](const LemmaResult& r) {
        return Json{{"hypothesis", r.hypothesis},       {"note", r.hypothesis_note}, {"max_violation", r.max_violation},
                    {"tolerance", r.tolerance},         {"passed", r.passed()}};
    };
    const bool dec_ok = std::abs(dec.residual) <= 1e-8 && std::abs(dec.lemma_residual) <= 1e-8;
    const bool bias_ok = !bounds.bias_hypothesis || bounds.bias_holds;
    AnalyzeOutput out;
    out.passed = dec_ok && lem.passed() && bias_ok;
    out.json = {
        {"decomposition",
         {{"total_gap", dec.total_gap},
          {"bias", dec.bias},
          {"regret", dec.regret},
          {"residual", dec.residual},
          {"lemma_residual", dec.lemma_residual},
          {"passed", dec_ok}}},
        {"lemmas",
         {{"behavior_value", lemma_json(lem.behavior_value)},
          {"optimal_dominance", lemma_json(lem.optimal_dominance)},
          {"occupancy", lemma_json(lem.occupancy)}}},
        {"bounds",
         {{"bias_bound", bounds.bias_bound},
          {"regret_bound", bounds.regret_bound},
          {"measured_bias", bounds.measured_bias},
          {"measured_regret", bounds.measured_regret},
          {"concentrability", std::isinf(bounds.concentrability) ? Json("inf") : Json(bounds.concentrability)},
          {"mu_min", bounds.mu_min},
          {"bias_hypothesis", bounds.bias_hypothesis},
          {"passed", bias_ok}}},
        {"passed", out.passed},
        {"manifest", manifest(cfg, "analysis", cfg.seed)}};
    out.json["manifest"]["N"] = tuples.size();
    out.json["manifest"]["alpha"] = alpha;
    out.report = out_dir / "analysis.json";
    write_json(out.report, out.json);
    return out;
}

// ---- sweep -----------------------------------------------------------------

struct SweepRow {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double alpha = 0.0;
    std::string strategy;
    double total_gap = 0.0;
    double bias = 0.0;
    double regret = 0.0;
    double bias_bound = 0.0;
    double regret_bound = 0.0;
    double residual = 0.0;
};

inline Json to_json(const SweepRow& r) {
    return {{"seed", r.seed},           {"N", r.n},                 {"alpha", r.alpha},
            {"strategy", r.strategy},   {"total_gap", r.total_gap}, {"bias", r.bias},
            {"regret", r.regret},       {"bias_bound", r.bias_bound}, {"regret_bound", r.regret_bound},
            {"residual", r.residual}};
}

inline SweepRow sweep_row_from_json(const Json& j) {
    SweepRow r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n = j.at("N").get<std::size_t>();
    r.alpha = j.at("alpha").get<double>();
    r.strategy = j.at("strategy").get<std::string>();
    r.total_gap = j.at("total_gap").get<double>();
    r.bias = j.at("bias").get<double>();
    r.regret = j.at("regret").get<double>();
    r.bias_bound = j.at("bias_bound").get<double>();
    r.regret_bound = j.at("regret_bound").get<double>();
    r.residual = j.at("residual").get<double>();
    return r;
}

struct GridPoint {
    std::size_t n;
    double alpha;
    std::string strategy;
    std::uint64_t seed;
};

/// Grid in row-major order over (N, alpha, strategy, seed).
inline std::vector<GridPoint> sweep_grid(const SweepSettings& s) {
    std::vector<GridPoint> out;
    for (auto n : s.n_list)
        for (auto a : s.alpha_list)
            for (const auto& k : s.strategy_list)
                for (auto seed : s.seed_list) out.push_back({n, a, k, seed});
    return out;
}

/// Rollout base seed of a sweep seed; keeps the seed + i trajectory streams of distinct seeds apart.
inline std::uint64_t sweep_data_seed(std::uint64_t seed) { return Rng::derive(seed, 2).next(); }

/**
 * One sweep cell: N transitions from the behavior policy, then the solver.
 * Strategy "lcb" runs the blended solver on raw tuples; constant, sigmoid
 * and rank relabel first and run the solver on the relabeled tuples.
 * Metrics use lambda = alpha on the data support and h = the Monte-Carlo
 * heuristic.
 */
inline SweepRow run_sweep_point(const RunConfig& cfg, const GridPoint& g) {
    const auto& mdp = cfg.mdp;
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const auto mu = cfg.behavior_policy();
    const auto data = rollout_transitions(mdp, mu, cfg.max_len, g.n, cfg.terminal_states, sweep_data_seed(g.seed));
    const auto tuples = flatten(data);
    const auto st = stats(tuples, ns, na);
    const auto mc = heuristics(data, ns);

    VilcbResult res;
    if (g.strategy == "lcb") {
        res = vi_lcb_hubl(tuples, ns, na, solver_config(cfg, g.alpha, g.seed), support_heuristic(mc, st.support),
                          st.support);
    } else {
        const auto rl = relabel(data, {parse_blend_kind(g.strategy), g.alpha}, mc.values);
        res = vi_lcb_relabeled(rl.tuples, ns, na, solver_config(cfg, g.alpha, g.seed));
    }

    const auto h = support_heuristic(mc, st.support).dense(0.0);
    const std::vector<double> lam(ns, g.alpha);
    const auto dec = decomposition_check(mdp, h, lam, st.support, res.policy);
    const auto opt = value_iteration(mdp, kAnalysisTolerance);
    const double conc = concentrability(discounted_occupancy(mdp, opt.policy), st.empirical_mu);
    SweepRow row;
    row.seed = g.seed;
    row.n = g.n;
    row.alpha = g.alpha;
    row.strategy = g.strategy;
    row.total_gap = dec.total_gap;
    row.bias = dec.bias;
    row.regret = dec.regret;
    row.residual = dec.residual;
    row.bias_bound = bias_bound(mdp, g.alpha, mu, st.support);
    row.regret_bound =
        regret_bound(g.n, mdp.gamma(), g.alpha, ns, conc, mu_min(st.empirical_mu, st.support), cfg.v_max());
    return row;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "seed,N,alpha,strategy,total_gap,bias,regret,bias_bound,regret_bound,residual\n";
    for (const auto& r : rows) {
        out += std::to_string(r.seed) + ',' + std::to_string(r.n) + ',' + hubl::detail::exact_double(r.alpha) + ',' +
               r.strategy + ',' + hubl::detail::exact_double(r.total_gap) + ',' + hubl::detail::exact_double(r.bias) +
               ',' + hubl::detail::exact_double(r.regret) + ',' + hubl::detail::exact_double(r.bias_bound) + ',' +
               hubl::detail::exact_double(r.regret_bound) + ',' + hubl::detail::exact_double(r.residual) + '\n';
    }
    return out;
}

struct SweepOutput {
    fs::path csv;
    std::vector<SweepRow> rows;
    std::size_t computed = 0;
    std::size_t reused = 0;
};

/**
 * Runs every grid cell not already present under out_dir/rows, using up to
 * `workers` threads, then writes sweep.csv in grid order.
 */
inline SweepOutput cmd_sweep(const RunConfig& cfg, const fs::path& out_dir, std::optional<std::size_t> workers = {}) {
    if (cfg.sweep.n_list.empty()) throw ValidationError("sweep: missing sweep section in config");
    const auto grid = sweep_grid(cfg.sweep);
    const fs::path rows_dir = out_dir / "rows";
    const std::string hash = cfg.hash();
    SweepOutput out;
    out.rows.resize(grid.size());
    std::vector<bool> have(grid.size(), false);

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto path = rows_dir / ("row_" + std::to_string(i) + ".json");
        if (!fs::exists(path)) continue;
        try {
            const Json j = Json::parse(read_file(path));
            if (j.at("manifest").at("config_hash").get<std::string>() != hash) continue;
            const auto row = sweep_row_from_json(j.at("row"));
            const auto& g = grid[i];
            if (row.n != g.n || row.alpha != g.alpha || row.strategy != g.strategy || row.seed != g.seed) continue;
            out.rows[i] = row;
            have[i] = true;
            ++out.reused;
        } catch (const std::exception&) {
            // Unreadable or stale rows are recomputed.
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            if (have[i]) continue;
            try {
                const auto row = run_sweep_point(cfg, grid[i]);
                Json j = {{"row", to_json(row)}, {"manifest", manifest(cfg, "sweep_row", grid[i].seed)}};
                write_json(rows_dir / ("row_" + std::to_string(i) + ".json"), j);
                out.rows[i] = row;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(grid.size());
                return;
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(workers.value_or(cfg.sweep.workers), grid.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    for (bool h : have)
        if (!h) ++out.computed;
    out.csv = out_dir / "sweep.csv";
    write_file(out.csv, sweep_csv(out.rows));
    auto m = manifest(cfg, "sweep", cfg.seed);
    m["rows"] = out.rows.size();
    write_json(out_dir / "sweep.manifest.json", m);
    return out;
}

} // namespace hubl::pipeline
