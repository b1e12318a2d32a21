// End-to-end acceptance checks. One line per criterion; nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "avgq/experiments.hpp"
#include "avgq/mdp.hpp"
#include "avgq/qlearn.hpp"
#include "avgq/solvers.hpp"
#include "avgq/stats.hpp"

namespace fs = std::filesystem;
using namespace avgq;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::ostringstream line;
    line << (pass ? "[PASS] " : "[FAIL] ") << id << ' ' << name << ": " << o.detail << " (" << secs << " s of "
         << budget_s << " s" << (in_time ? ")" : ", over budget)");
    std::cout << line.str() << std::endl;
}

void info(const std::string& msg) { std::cout << "       " << msg << std::endl; }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

std::vector<Mdp> oracle_instances() {
    std::vector<Mdp> out;
    for (std::uint64_t s = 42; s < 47; ++s) out.push_back(generate_dense_random_mdp(20, 5, s));
    for (std::uint64_t s = 7; s < 12; ++s) out.push_back(generate_sparse_random_mdp(20, 5, 0.5, s));
    return out;
}

std::vector<Mdp> small_instances() {
    std::vector<Mdp> out;
    for (std::uint64_t s = 11; s < 16; ++s) out.push_back(generate_dense_random_mdp(4, 2, s));
    return out;
}

Mdp cycle2() { return Mdp(2, 1, {0, 1, 1, 0}, {1, 3}); }

// ---------------------------------------------------------------------------

Outcome oracle_agreement() {
    double worst = 0.0;
    for (const auto& m : oracle_instances()) {
        const auto r = solve_exact(m);
        worst = std::max({worst, std::abs(r.beta - r.beta_coupled), std::abs(r.beta - r.beta_rvi),
                          std::abs(r.beta_coupled - r.beta_rvi)});
    }
    double worst_small = 0.0;
    for (const auto& m : small_instances()) {
        const auto r = solve_exact(m);
        const double e = policy_enumeration_oracle(m).first;
        worst_small = std::max({worst_small, std::abs(r.beta - e), std::abs(r.beta_coupled - e),
                                std::abs(r.beta_rvi - e)});
    }
    return {worst <= 1e-6 && worst_small <= 1e-8,
            "20x5 pairwise max " + fmt(worst) + " (<= 1e-6); 4x2 vs enumeration max " + fmt(worst_small) +
                " (<= 1e-8)"};
}

Outcome contraction_certificate() {
    auto instances = oracle_instances();
    for (auto& m : small_instances()) instances.push_back(m);
    instances.push_back(cycle2());
    bool ok = true;
    double worst_margin = -INFINITY;
    Rng rng(0xacce55);
    for (const auto& m : instances) {
        const auto w = contraction_weights(m);
        ok = ok && w.alpha > 0.0 && w.alpha < 1.0;
        const std::size_t d = m.num_states(), r = m.num_actions();
        for (int t = 0; t < 1000; ++t) {
            QTable a(d, r), b(d, r), diff(d, r), fdiff(d, r);
            for (std::size_t k = 0; k < a.size(); ++k) {
                a.values()[k] = 20.0 * rng.uniform() - 10.0;
                b.values()[k] = 20.0 * rng.uniform() - 10.0;
                diff.values()[k] = a.values()[k] - b.values()[k];
            }
            const double lam = 2.0 * rng.uniform() - 1.0;
            const auto fa = ssp_bellman_q(m, a, lam), fb = ssp_bellman_q(m, b, lam);
            for (std::size_t k = 0; k < a.size(); ++k) fdiff.values()[k] = fa.values()[k] - fb.values()[k];
            const double lhs = weighted_norm(fdiff, w);
            const double rhs = (w.alpha + 1e-9) * weighted_norm(diff, w);
            ok = ok && lhs <= rhs;
            worst_margin = std::max(worst_margin, lhs / weighted_norm(diff, w) - w.alpha);
        }
    }
    return {ok, std::to_string(instances.size()) + " instances x 1000 pairs; max (ratio - alpha) = " +
                    fmt(worst_margin)};
}

Outcome lemma1() {
    const auto m = generate_dense_random_mdp(20, 5, 42);
    const auto res = solve_exact(m);
    auto c = default_run_config(m, Algorithm::Ssp);
    const long N = c.fast_schedule.validity_start();
    c.audit_from = N;
    c.checkpoint_steps = {N};
    c.seed = 2024;
    const auto traces = run_replications(m, c, 100, {std::nullopt, res.beta, res.norm});
    const double K = lemma1_constant(m, res.norm, c.g);
    int fails = 0;
    double worst = 0.0;
    for (const auto& t : traces) {
        if (!lemma1_audit(t, res.norm, K, res.norm.alpha, N)) ++fails;
        worst = std::max(worst, t.q_norm_sup / lemma1_bound(t.q_norm_at_audit_start, K, res.norm.alpha));
    }
    return {fails == 0, "100 runs, " + std::to_string(fails) + " failures; max sup||Q_n||_w / bound = " + fmt(worst)};
}

Outcome fig1_reproduction() {
    const Mdp dense = generate_dense_random_mdp(20, 5, 42);
    const Mdp sparse = generate_sparse_random_mdp(20, 5, 0.5, 7);
    const auto dres = solve_exact(dense), sres = solve_exact(sparse);

    // (a) every seed, both algorithms, both instances.
    int reached = 0, total = 0;
    for (const auto* inst : {&dense, &sparse}) {
        const auto& res = inst == &dense ? dres : sres;
        auto ssp = default_run_config(*inst, Algorithm::Ssp);
        auto rvi = ssp;
        rvi.algorithm = Algorithm::Rvi;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto rep = compare_rvi_ssp(*inst, ssp, rvi, seed, res);
            reached += rep.ssp_min_error < 0.1 * rep.ssp_initial_error;
            reached += rep.rvi_min_error < 0.1 * rep.rvi_initial_error;
            total += 2;
        }
    }
    // (b) early-phase oscillation over a 1e6-step horizon (early 20% = 2e5 steps).
    const auto st = oscillation_study(dense, dres, sparse, sres, 1000000, 1000, 20, 1);
    info("oscillation medians: dense " + fmt(stats::median(st.first)) + ", sparse " +
         fmt(stats::median(st.second)));
    return {reached == total && st.significant,
            "(a) " + std::to_string(reached) + "/" + std::to_string(total) +
                " runs reach < 10% of initial within 2e5 steps; (b) Mann-Whitney z = " + fmt(st.z) +
                ", one-sided p = " + fmt(st.p_value) + " (< 0.05)"};
}

Outcome lambda_convergence() {
    const auto m = cycle2();
    auto c = default_run_config(m, Algorithm::Ssp);
    c.total_steps = 100000;
    c.checkpoint_stride = 100000;
    c.seed = 5;
    const auto traces = run_replications(m, c, 200);
    std::vector<double> dev;
    for (const auto& t : traces) dev.push_back(std::abs(t.final_lambda - 2.0));
    const double q90 = stats::quantile(dev, 0.9);
    return {q90 < 0.1, "200 runs, 90th percentile |lambda_final - 2| = " + fmt(q90) + " (< 0.1)"};
}

Outcome concentration() {
    ConcentrationOptions opt;
    opt.replications = 200;
    opt.n0 = 10000;

    const auto c2 = cycle2();
    auto cc = default_run_config(c2, Algorithm::Ssp);
    cc.total_steps = 100000;
    const auto cyc = concentration_experiment(c2, cc, solve_exact(c2), opt);

    const auto m = generate_dense_random_mdp(20, 5, 42);
    const auto dense = concentration_experiment(m, default_run_config(m, Algorithm::Ssp), solve_exact(m), opt);
    info("dense 20x5: monotone-in-delta " + std::string(dense.monotone_in_delta ? "yes" : "no") +
         ", top delta zero at final " + (dense.top_delta_zero_at_final ? "yes" : "no") +
         ", median non-increasing in " + fmt(dense.bootstrap_monotone_fraction) +
         " of bootstrap resamples (informational)");
    return {cyc.passed() && dense.monotone_in_delta && dense.top_delta_zero_at_final,
            "cycle: monotone-in-delta " + std::string(cyc.monotone_in_delta ? "yes" : "no") +
                ", top delta zero at final " + (cyc.top_delta_zero_at_final ? "yes" : "no") +
                ", median non-increasing in " + fmt(cyc.bootstrap_monotone_fraction) +
                " of resamples (>= 0.95); dense 20x5 structural checks " +
                (dense.monotone_in_delta && dense.top_delta_zero_at_final ? "hold" : "fail")};
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Runs a fixed CLI pipeline in `dir` and hashes stdout plus every file written.
std::uint64_t pipeline_digest(const fs::path& dir, const std::string& jobs) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::copy_file(AVGQ_DATA "/cycle2.mdp", dir / "cycle2.mdp");
    const std::vector<std::string> commands = {
        "generate --dense -d 20 -r 5 --seed 42",
        "generate --sparse --zero-fraction 0.5 -d 20 -r 5 --seed 7",
        "solve",
        "solve sparse-20x5-s7.mdp",
        "train --algo ssp --steps 50000 --seed 3",
        "train --algo rvi --steps 50000 --seed 3",
        "compare",
        "compare sparse-20x5-s7.mdp --seed 11",
        "validate-bounds cycle2.mdp -R 100 --steps 40000 --jobs ",
    };
    std::string log;
    for (const auto& c : commands) {
        // Only the job count may differ between pipelines; it is left out of the log.
        const std::string args = c.ends_with("--jobs ") ? c + jobs : c;
        const std::string cmd = "cd '" + dir.string() + "' && '" AVGQ_CLI "' " + args + " > out.txt 2>&1; echo $? >> out.txt";
        if (std::system(cmd.c_str()) == -1) throw std::runtime_error("cannot run the CLI");
        log += c + "\n" + slurp(dir / "out.txt");
    }
    fs::remove(dir / "out.txt");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = fnv1a(log);
    for (const auto& f : files) h = fnv1a(f.string() + "\n" + slurp(dir / f), h);
    return h;
}

Outcome determinism() {
    const auto base = fs::temp_directory_path() / "avgq-acceptance";
    const auto a = pipeline_digest(base / "a", "1");
    const auto b = pipeline_digest(base / "b", "1");
    const auto c = pipeline_digest(base / "c", "3");
    fs::remove_all(base);
    std::ostringstream os;
    os << std::hex << a << ' ' << b << ' ' << c;
    return {a == b && b == c, "pipeline digests " + os.str() + " (reruns and --jobs 1 vs 3)"};
}

Outcome mean_field() {
    bool ok = true;
    std::string detail;
    for (const auto& m : {generate_dense_random_mdp(20, 5, 42), generate_sparse_random_mdp(20, 5, 0.5, 7)}) {
        const auto res = solve_exact(m);
        const auto mf = run_mean_field(m, default_run_config(m, Algorithm::Ssp), 1e-9, 100000000);
        const double dl = std::abs(mf.lambda - res.beta);
        const double dq = sup_distance(mf.q, res.q_star_ssp);
        const double dc = std::abs(mf.lambda - res.beta_coupled);
        ok = ok && dl <= 1e-6 && dq <= 1e-6 && dc <= 1e-6;
        detail += (detail.empty() ? "" : "; ") + m.generator().kind + ": |lambda-beta| " + fmt(dl) +
                  ", |Q-Q*|_inf " + fmt(dq) + ", |lambda-coupled| " + fmt(dc);
    }
    return {ok, detail + " (all <= 1e-6)"};
}

}  // namespace

int main() {
    criterion(1, "oracle agreement", 30, oracle_agreement);
    criterion(2, "contraction certificate", 10, contraction_certificate);
    criterion(3, "boundedness audit", 300, lemma1);
    criterion(4, "SSP vs RVI qualitative reproduction", 600, fig1_reproduction);
    criterion(5, "lambda convergence", 120, lambda_convergence);
    criterion(6, "concentration envelope", 600, concentration);
    criterion(7, "determinism", 600, determinism);
    criterion(8, "mean-field equivalence", 600, mean_field);
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
