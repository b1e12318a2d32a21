// avgq: generate instances, solve them exactly, train, compare and validate bounds.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "avgq/errors.hpp"
#include "avgq/experiments.hpp"
#include "avgq/mdp.hpp"
#include "avgq/qlearn.hpp"
#include "avgq/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int {
    kOk = 0,
    kRuntime = 1,
    kInvalid = 2,
    kValidation = 3,
    kAssertion = 4,
};

constexpr const char* kOutEnv = "AVGQ_OUT_DIR";

/// Assertion failures that should surface as exit code 4.
struct AssertionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Values a subcommand may take from the experiment file. Flags win.
struct FileConfig {
    std::optional<std::string> instance;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::optional<std::string> algo;
    std::optional<long> checkpoint_stride;
    std::optional<std::size_t> replications;
    std::optional<long> n0;
    std::optional<std::size_t> jobs;
    std::optional<std::string> kind;
    std::optional<std::size_t> states;
    std::optional<std::size_t> actions;
    std::optional<double> zero_fraction;
};

template <class T>
void take(const json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

FileConfig load_file_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw avgq::ConfigError("cannot open config file '" + path + "'");
    FileConfig c;
    try {
        const json j = json::parse(in, nullptr, true, true);
        if (j.value("format", "") != "avgq-experiment" || j.value("version", 0) != 1) {
            throw avgq::ParseError(path + ": expected format avgq-experiment, version 1", 0);
        }
        take(j, "instance", c.instance);
        take(j, "out_dir", c.out_dir);
        take(j, "seed", c.seed);
        take(j, "steps", c.steps);
        take(j, "algo", c.algo);
        take(j, "checkpoint_stride", c.checkpoint_stride);
        take(j, "replications", c.replications);
        take(j, "n0", c.n0);
        take(j, "jobs", c.jobs);
        if (j.contains("generator")) {
            const auto& g = j.at("generator");
            take(g, "kind", c.kind);
            take(g, "states", c.states);
            take(g, "actions", c.actions);
            take(g, "zero_fraction", c.zero_fraction);
            if (!c.seed) take(g, "seed", c.seed);
        }
    } catch (const json::exception& e) {
        throw avgq::ParseError(path + ": " + e.what(), 0);
    }
    return c;
}

template <class T>
T pick(const std::optional<T>& flag, const std::optional<T>& file, T fallback) {
    if (flag) return *flag;
    if (file) return *file;
    return fallback;
}

struct Common {
    std::optional<std::string> config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int verbosity = 0;
    FileConfig file;

    fs::path out() const {
        if (out_dir) return *out_dir;
        if (file.out_dir) return *file.out_dir;
        if (const char* env = std::getenv(kOutEnv); env && *env) return env;
        return ".";
    }

    void log(const std::string& msg) const {
        if (verbosity > 0) std::cerr << msg << '\n';
    }
};

void line(const std::string& key, const std::string& value) { std::cout << key << ": " << value << '\n'; }
void line(const std::string& key, double value) { line(key, avgq::format_double(value)); }
void line(const std::string& key, long value) { line(key, std::to_string(value)); }
void line(const std::string& key, bool value) { line(key, std::string(value ? "true" : "false")); }

std::string default_instance_name(const std::string& kind, std::size_t d, std::size_t r, std::uint64_t seed) {
    return kind + "-" + std::to_string(d) + "x" + std::to_string(r) + "-s" + std::to_string(seed) + ".mdp";
}

fs::path resolve_instance(const Common& common, const std::optional<std::string>& flag) {
    if (flag) return *flag;
    if (common.file.instance) return *common.file.instance;
    return common.out() / default_instance_name("dense", 20, 5, 42);
}

fs::path artifact(const Common& common, const fs::path& instance, const std::string& suffix) {
    return common.out() / (instance.stem().string() + suffix);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw avgq::Error("cannot create directory '" + dir.string() + "': " + ec.message());
}

avgq::Mdp load_instance(const fs::path& path) {
    if (!fs::exists(path)) throw avgq::ConfigError("instance file '" + path.string() + "' not found");
    return avgq::load_mdp(path.string());
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw avgq::Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw avgq::Error("write to '" + path.string() + "' failed");
}

constexpr double kAgreementTol = 1e-6;

avgq::SolveResult solve_and_check(const avgq::Mdp& mdp) {
    auto res = avgq::solve_exact(mdp);
    if (!(res.max_disagreement <= kAgreementTol)) {
        throw avgq::NonConvergence("exact oracles disagree by " + avgq::format_double(res.max_disagreement),
                                   res.residual, res.iterations);
    }
    return res;
}

/// Reads <stem>.solve.json from the output directory, solving and writing it
/// first when missing.
avgq::SolveResult solved_for(const Common& common, const fs::path& instance, const avgq::Mdp& mdp) {
    const fs::path path = artifact(common, instance, ".solve.json");
    if (fs::exists(path)) {
        std::ifstream in(path);
        auto res = avgq::read_solve_result(in);
        if (res.q_star_ssp.num_states() != mdp.num_states() ||
            res.q_star_ssp.num_actions() != mdp.num_actions()) {
            throw avgq::ConfigError("solve artifact '" + path.string() + "' does not match the instance");
        }
        common.log("using " + path.string());
        return res;
    }
    common.log("solving " + instance.string());
    auto res = solve_and_check(mdp);
    ensure_dir(common.out());
    std::ostringstream os;
    avgq::write_solve_result(os, res);
    write_file(path, os.str());
    return res;
}

void report_assertions(const std::vector<std::pair<std::string, bool>>& checks) {
    bool all = true;
    for (const auto& [name, ok] : checks) {
        line("assert " + name, std::string(ok ? "pass" : "FAIL"));
        all = all && ok;
    }
    if (!all) throw AssertionFailure("one or more assertions failed");
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    bool dense = false;
    bool sparse = false;
    std::optional<std::size_t> d;
    std::optional<std::size_t> r;
    std::optional<double> zero_fraction;
    std::optional<std::string> output;
};

int cmd_generate(const Common& common, const GenerateArgs& a) {
    std::string kind = common.file.kind.value_or("dense");
    if (a.dense) kind = "dense";
    if (a.sparse) kind = "sparse";
    if (kind != "dense" && kind != "sparse") throw avgq::ConfigError("unknown generator kind '" + kind + "'");
    const std::size_t d = pick(a.d, common.file.states, std::size_t{20});
    const std::size_t r = pick(a.r, common.file.actions, std::size_t{5});
    const std::uint64_t seed = pick(common.seed, common.file.seed, std::uint64_t{42});
    if (d < 1 || r < 1) throw avgq::ConfigError("need at least one state and one action");

    avgq::Mdp mdp;
    if (kind == "dense") {
        mdp = avgq::generate_dense_random_mdp(d, r, seed);
    } else {
        const auto zf = a.zero_fraction ? a.zero_fraction : common.file.zero_fraction;
        if (!zf) throw avgq::ConfigError("--sparse requires --zero-fraction");
        if (!(*zf >= 0.0 && *zf <= 1.0)) throw avgq::ConfigError("--zero-fraction must lie in [0, 1]");
        mdp = avgq::generate_sparse_random_mdp(d, r, *zf, seed);
    }

    const fs::path path = a.output ? fs::path(*a.output) : common.out() / default_instance_name(kind, d, r, seed);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    avgq::save_mdp(path.string(), mdp);

    const auto report = avgq::validate_mdp(mdp);
    line("instance", path.string());
    line("states", static_cast<long>(d));
    line("actions", static_cast<long>(r));
    line("seed", std::to_string(seed));
    line("row_sum_max_deviation", report.row_sum_max_deviation);
    line("proper", report.proper_ok);
    for (const auto& m : report.messages) std::cerr << "validation: " << m << '\n';
    return report.ok() ? kOk : kValidation;
}

int cmd_solve(const Common& common, const std::optional<std::string>& instance_flag) {
    const fs::path instance = resolve_instance(common, instance_flag);
    const auto mdp = load_instance(instance);
    const auto v = avgq::validate_mdp(mdp);
    if (!v.ok()) {
        for (const auto& m : v.messages) std::cerr << "validation: " << m << '\n';
        return kValidation;
    }
    const auto res = solve_and_check(mdp);
    ensure_dir(common.out());
    const fs::path path = artifact(common, instance, ".solve.json");
    std::ostringstream os;
    avgq::write_solve_result(os, res);
    write_file(path, os.str());

    line("solution", path.string());
    line("beta", res.beta);
    line("beta_coupled", res.beta_coupled);
    line("beta_rvi", res.beta_rvi);
    if (std::isfinite(res.beta_enumeration)) line("beta_enumeration", res.beta_enumeration);
    line("max_disagreement", res.max_disagreement);
    line("alpha", res.norm.alpha);
    line("certified_ratio", res.norm.certified_ratio);
    line("residual", res.residual);
    line("iterations", res.iterations);
    return kOk;
}

struct TrainArgs {
    std::optional<std::string> instance;
    std::optional<std::string> algo;
    std::optional<long> steps;
    std::optional<long> stride;
};

avgq::RunConfig run_config_for(const Common& common, const avgq::Mdp& mdp, avgq::Algorithm algo,
                               const std::optional<long>& steps, const std::optional<long>& stride) {
    auto c = avgq::default_run_config(mdp, algo);
    c.total_steps = pick(steps, common.file.steps, c.total_steps);
    c.checkpoint_stride = pick(stride, common.file.checkpoint_stride, c.checkpoint_stride);
    c.seed = pick(common.seed, common.file.seed, std::uint64_t{0});
    if (c.checkpoint_stride < 1) throw avgq::ConfigError("checkpoint stride must be >= 1");
    avgq::validate_config(c, mdp);
    return c;
}

int cmd_train(const Common& common, const TrainArgs& a) {
    const fs::path instance = resolve_instance(common, a.instance);
    const auto mdp = load_instance(instance);
    const auto algo = avgq::algorithm_from_string(pick(a.algo, common.file.algo, std::string("ssp")));
    const auto config = run_config_for(common, mdp, algo, a.steps, a.stride);
    const auto solved = solved_for(common, instance, mdp);

    avgq::RunTargets t;
    t.q_star = algo == avgq::Algorithm::Ssp ? solved.q_star_ssp : solved.q_star_rvi;
    t.beta = solved.beta;
    t.norm = solved.norm;
    const auto trace = avgq::run_async(mdp, config, t);

    const fs::path path = artifact(common, instance,
                                   "." + avgq::to_string(algo) + ".s" + std::to_string(config.seed) + ".trace.csv");
    std::ostringstream os;
    avgq::write_trace(os, trace);
    write_file(path, os.str());

    const auto& last = trace.checkpoints.back();
    line("trace", path.string());
    line("algorithm", avgq::to_string(algo));
    line("seed", std::to_string(config.seed));
    line("steps", config.total_steps);
    line("beta", solved.beta);
    line("final_lambda", trace.final_lambda);
    line("final_sq_error", last.sq_l2_error);
    line("initial_sq_error", trace.checkpoints.front().sq_l2_error);
    return kOk;
}

int cmd_compare(const Common& common, const TrainArgs& a) {
    const fs::path instance = resolve_instance(common, a.instance);
    const auto mdp = load_instance(instance);
    const auto solved = solved_for(common, instance, mdp);
    const auto ssp = run_config_for(common, mdp, avgq::Algorithm::Ssp, a.steps, a.stride);
    auto rvi = ssp;
    rvi.algorithm = avgq::Algorithm::Rvi;

    const auto rep = avgq::compare_rvi_ssp(mdp, ssp, rvi, ssp.seed, solved);
    const std::string tag = ".s" + std::to_string(ssp.seed);
    const fs::path base = artifact(common, instance, ".compare" + tag);
    avgq::emit_report(rep, base.string());

    // Full per-algorithm traces next to the report.
    const std::pair<const avgq::RunConfig*, const avgq::QTable*> runs[] = {
        {&ssp, &solved.q_star_ssp}, {&rvi, &solved.q_star_rvi}};
    for (const auto& [cfg, target] : runs) {
        avgq::RunTargets t;
        t.q_star = *target;
        t.beta = solved.beta;
        t.norm = solved.norm;
        std::ostringstream os;
        avgq::write_trace(os, avgq::run_async(mdp, *cfg, t));
        write_file(artifact(common, instance, ".compare" + tag + "." + avgq::to_string(cfg->algorithm) + ".trace.csv"),
                   os.str());
    }

    line("report", base.string() + ".json");
    line("series", base.string() + ".csv");
    line("beta", rep.beta);
    line("ssp_final_lambda", rep.ssp_final_lambda);
    line("ssp_initial_sq_error", rep.ssp_initial_error);
    line("ssp_final_sq_error", rep.ssp_final_error);
    line("ssp_min_sq_error", rep.ssp_min_error);
    line("rvi_initial_sq_error", rep.rvi_initial_error);
    line("rvi_final_sq_error", rep.rvi_final_error);
    line("rvi_min_sq_error", rep.rvi_min_error);
    line("ssp_oscillation", rep.ssp_oscillation);
    line("rvi_oscillation", rep.rvi_oscillation);
    report_assertions({{"ssp_reaches_10pct", rep.ssp_min_error < 0.1 * rep.ssp_initial_error},
                       {"rvi_reaches_10pct", rep.rvi_min_error < 0.1 * rep.rvi_initial_error}});
    return kOk;
}

struct BoundsArgs {
    std::optional<std::string> instance;
    std::optional<std::size_t> replications;
    std::optional<long> n0;
    std::optional<long> steps;
    std::optional<std::size_t> jobs;
};

int cmd_validate_bounds(const Common& common, const BoundsArgs& a) {
    const fs::path instance = resolve_instance(common, a.instance);
    const auto mdp = load_instance(instance);
    const auto solved = solved_for(common, instance, mdp);

    avgq::ConcentrationOptions opt;
    opt.replications = pick(a.replications, common.file.replications, opt.replications);
    opt.n0 = pick(a.n0, common.file.n0, opt.n0);
    opt.jobs = pick(a.jobs, common.file.jobs, std::size_t{1});
    if (opt.jobs < 1) throw avgq::ConfigError("--jobs must be >= 1");
    auto config = run_config_for(common, mdp, avgq::Algorithm::Ssp, a.steps, opt.n0);

    common.log("envelope: " + std::to_string(opt.replications) + " replications");
    const auto env = avgq::concentration_experiment(mdp, config, solved, opt);
    const std::string tag = ".s" + std::to_string(config.seed);
    const fs::path env_base = artifact(common, instance, ".envelope" + tag);
    avgq::emit_report(env, env_base.string());

    // Boundedness and lambda concentration over a second, independent set of runs
    // recorded on an n0-spaced grid.
    const long N = config.fast_schedule.validity_start();
    config.audit_from = N;
    config.checkpoint_steps = {N};
    config.seed = avgq::derive_seed(config.seed, 0xa0d17);
    avgq::RunTargets t;
    t.beta = solved.beta;
    t.norm = solved.norm;
    const auto traces = avgq::run_replications(mdp, config, opt.replications, t, opt.jobs);
    const double K = avgq::lemma1_constant(mdp, solved.norm, config.g);
    std::size_t audit_failures = 0;
    for (const auto& tr : traces) {
        if (!avgq::lemma1_audit(tr, solved.norm, K, solved.norm.alpha, N)) ++audit_failures;
    }
    const auto lam = avgq::lambda_concentration(traces, solved.beta, opt.n0);
    const fs::path lam_base = artifact(common, instance, ".lambda" + tag);
    avgq::emit_report(lam, lam_base.string());

    line("envelope_report", env_base.string() + ".json");
    line("lambda_report", lam_base.string() + ".json");
    line("replications", static_cast<long>(opt.replications));
    line("n0", opt.n0);
    line("alpha", env.alpha);
    line("K", env.K);
    line("lemma1_bound", env.lemma1_bound);
    line("lemma1_failures", static_cast<long>(audit_failures));
    line("median_bootstrap_fraction", env.bootstrap_monotone_fraction);
    line("lambda_q90_final", lam.q90.back());
    line("lambda_tail_bootstrap_fraction", lam.bootstrap_tail_fraction);
    report_assertions({{"lemma1_all_runs", audit_failures == 0},
                       {"exceedance_monotone_in_delta", env.monotone_in_delta},
                       {"top_delta_zero_at_final", env.top_delta_zero_at_final},
                       {"median_error_non_increasing", env.median_non_increasing},
                       {"lambda_median_decays", lam.median_decays},
                       {"lambda_spread_shrinks", lam.spread_shrinks},
                       {"lambda_tail_non_increasing", lam.tail_non_increasing}});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Average-cost Q-learning via stochastic shortest path: experiments toolkit"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path, "Experiment file (JSON, format avgq-experiment)");
    app.add_option("--out", common.out_dir, std::string("Output directory (default $") + kOutEnv + " or .)");
    app.add_option("--seed", common.seed, "Seed override");
    app.add_flag("-v,--verbose", common.verbosity, "Progress on standard error");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a random instance");
    auto* dense_flag = generate->add_flag("--dense", gen.dense, "Dense instance (default)");
    generate->add_flag("--sparse", gen.sparse, "Sparse instance")->excludes(dense_flag);
    generate->add_option("-d,--states", gen.d, "Number of states (default 20)");
    generate->add_option("-r,--actions", gen.r, "Number of actions (default 5)");
    generate->add_option("--zero-fraction", gen.zero_fraction, "Fraction of zeroed entries (sparse)");
    generate->add_option("-o,--output", gen.output, "Instance path");

    std::optional<std::string> solve_instance;
    auto* solve = app.add_subcommand("solve", "Solve an instance exactly with every oracle");
    solve->add_option("instance", solve_instance, "Instance file");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "One asynchronous learning run");
    train->add_option("instance", train_args.instance, "Instance file");
    train->add_option("--algo", train_args.algo, "ssp or rvi")->check(CLI::IsMember({"ssp", "rvi"}));
    train->add_option("--steps", train_args.steps, "Number of steps (default 200000)");
    train->add_option("--stride", train_args.stride, "Checkpoint stride (default 1000)");

    TrainArgs compare_args;
    auto* compare = app.add_subcommand("compare", "SSP vs RVI error series on one seed");
    compare->add_option("instance", compare_args.instance, "Instance file");
    compare->add_option("--steps", compare_args.steps, "Number of steps (default 200000)");
    compare->add_option("--stride", compare_args.stride, "Checkpoint stride (default 1000)");

    BoundsArgs bounds_args;
    auto* bounds = app.add_subcommand("validate-bounds", "Boundedness and concentration checks");
    bounds->add_option("instance", bounds_args.instance, "Instance file");
    bounds->add_option("-R,--replications", bounds_args.replications, "Replications (default 200)");
    bounds->add_option("--n0", bounds_args.n0, "Envelope start step (default 10000)");
    bounds->add_option("--steps", bounds_args.steps, "Steps per run (default 200000)");
    bounds->add_option("--jobs", bounds_args.jobs, "Worker threads (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kInvalid;
    }

    try {
        if (common.config_path) common.file = load_file_config(*common.config_path);
        if (*generate) return cmd_generate(common, gen);
        if (*solve) return cmd_solve(common, solve_instance);
        if (*train) return cmd_train(common, train_args);
        if (*compare) return cmd_compare(common, compare_args);
        if (*bounds) return cmd_validate_bounds(common, bounds_args);
    } catch (const AssertionFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kAssertion;
    } catch (const avgq::NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        std::cerr << "residual: " << avgq::format_double(e.residual) << '\n';
        return kValidation;
    } catch (const avgq::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kInvalid;
    } catch (const avgq::ConfigError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const avgq::SizeError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const avgq::DimensionError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}
