#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "avgq/errors.hpp"
#include "avgq/experiments.hpp"
#include "avgq/stats.hpp"
#include "fixtures.hpp"

using namespace avgq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("avgq-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("quantiles") {
    CHECK(stats::quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(stats::quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(stats::quantile({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK(stats::quantile({1, 2, 3, 4, 5}, 0.1) == doctest::Approx(1.4));
    CHECK(stats::median({7}) == 7.0);
    CHECK_THROWS_AS(stats::quantile({}, 0.5), SizeError);
}

TEST_CASE("mann-whitney") {
    const std::vector<double> hi{5, 6, 7, 8, 9, 10, 11, 12}, lo{1, 2, 3, 4, 4.5, 0, -1, -2};
    // Complete separation with n1 = n2 = 8: U = 64, mean 32, sd sqrt(8*8*17/12).
    CHECK(stats::mann_whitney_z(hi, lo) == doctest::Approx(32.0 / std::sqrt(64.0 * 17.0 / 12.0)));
    CHECK(stats::mann_whitney_z(lo, hi) == doctest::Approx(-32.0 / std::sqrt(64.0 * 17.0 / 12.0)));
    CHECK(stats::mann_whitney_z(hi, hi) == doctest::Approx(0.0));
    CHECK(stats::normal_sf(0.0) == doctest::Approx(0.5));
    CHECK(stats::normal_sf(1.6448536269514722) == doctest::Approx(0.05).epsilon(1e-9));
}

}  // TEST_SUITE

TEST_SUITE("experiments") {

TEST_CASE("x*(lambda)") {
    const auto m = fixtures::dense42();
    const auto res = solve_exact(m);
    CHECK(sup_distance(q_star_of_lambda(m, res.beta, 1e-11), ssp_q_star(m, res.beta, 1e-11)) <= 1e-9);

    // Cycle at lambda = 0 against an independent value-iteration oracle.
    const auto c = fixtures::cycle2();
    const auto v = ssp_value_iteration(c, 0.0, 1e-13, 100000);
    const auto q = q_star_of_lambda(c, 0.0, 1e-12);
    for (State i = 0; i < 2; ++i) {
        double target = c.cost(i, 0);
        for (State j = 1; j < 2; ++j) target += c.p(i, 0, j) * v.v[j];
        CHECK(std::abs(q(i, 0) - target) <= 1e-10);
    }
    CHECK(sup_distance(ssp_bellman_q(c, q, 0.0), q) <= 1e-10);
}

TEST_CASE("x*(lambda) is Lipschitz in lambda") {
    const auto m = fixtures::sparse7();
    const auto norm = contraction_weights(m, 10);
    std::vector<double> grid;
    for (int t = 0; t <= 20; ++t) grid.push_back(-1.0 + 0.1 * t);
    const double L = estimate_lambda_lipschitz(m, norm, grid, 1e-11);
    CHECK(std::isfinite(L));
    CHECK(L > 0.0);
    // Off-grid pairs respect the estimate (piecewise-linear map, slack for kinks).
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        const double a = -1.0 + 2.0 * rng.uniform(), b = -1.0 + 2.0 * rng.uniform();
        QTable d = q_star_of_lambda(m, a, 1e-11);
        const auto e = q_star_of_lambda(m, b, 1e-11);
        for (std::size_t k = 0; k < d.size(); ++k) d.values()[k] -= e.values()[k];
        CHECK(weighted_norm(d, norm) <= 1.01 * L * std::abs(a - b) + 1e-8);
    }
}

TEST_CASE("oscillation metric") {
    CHECK(oscillation_metric({10, 8, 6, 4, 2, 1}) == 0.0);
    // Early window is the first 3 of 11 points: rise 4 -> 7 over initial 10.
    CHECK(oscillation_metric({10, 4, 7, 1, 9, 9, 9, 9, 9, 9, 9}) == doctest::Approx(0.3));
    CHECK(oscillation_metric({}) == 0.0);
}

TEST_CASE("comparison on the cycle") {
    const auto m = fixtures::cycle2();
    const auto res = solve_exact(m);
    auto ssp = default_run_config(m, Algorithm::Ssp);
    ssp.total_steps = 100000;
    auto rvi = ssp;
    rvi.algorithm = Algorithm::Rvi;
    const auto rep = compare_rvi_ssp(m, ssp, rvi, 3, res);
    CHECK(rep.ssp_final_error < 0.05);
    CHECK(rep.rvi_final_error < 0.05);
    CHECK(rep.series.size() == 101);
    CHECK(rep.series.back().step == 100000);
    CHECK(rep.beta == res.beta);

    auto other = rvi;
    other.fast_schedule = StepSchedule::power_law(1.0, 0.8);
    CHECK_THROWS_AS(compare_rvi_ssp(m, ssp, other, 3, res), ConfigError);
    other = rvi;
    other.checkpoint_stride = 10;
    CHECK_THROWS_AS(compare_rvi_ssp(m, ssp, other, 3, res), ConfigError);
}

TEST_CASE("comparison on dense 20x5") {
    const auto m = fixtures::dense42();
    const auto res = solve_exact(m);
    const auto ssp = default_run_config(m, Algorithm::Ssp);
    auto rvi = ssp;
    rvi.algorithm = Algorithm::Rvi;
    const auto rep = compare_rvi_ssp(m, ssp, rvi, 0, res);
    CHECK(rep.ssp_min_error < 0.1 * rep.ssp_initial_error);
    CHECK(rep.rvi_min_error < 0.1 * rep.rvi_initial_error);
    CHECK(rep.rvi_final_error < 0.1 * rep.rvi_initial_error);
    for (const auto& p : rep.series) CHECK(p.step % ssp.checkpoint_stride == 0);
}

TEST_CASE("lemma 1 audit controls") {
    const auto m = fixtures::dense42();
    const auto norm = contraction_weights(m, 10);
    const double K = lemma1_constant(m, norm, 2.0);
    CHECK(K > 0.0);

    Trace frozen;
    for (long n : {0L, 3L, 100L, 10000L}) {
        Checkpoint cp;
        cp.step = n;
        cp.q_norm = 0.7;
        frozen.checkpoints.push_back(cp);
    }
    CHECK(lemma1_audit(frozen, norm, K, norm.alpha, 3));

    Trace bad = frozen;
    bad.checkpoints.back().q_norm = 0.7 + K / (1.0 - norm.alpha) + 1e-3;
    CHECK_FALSE(lemma1_audit(bad, norm, K, norm.alpha, 3));

    // A violation before N does not count.
    Trace early = frozen;
    early.checkpoints.front().q_norm = 1e9;
    CHECK(lemma1_audit(early, norm, K, norm.alpha, 3));

    CHECK_THROWS_AS(lemma1_audit(frozen, norm, K, norm.alpha, 4), ConfigError);
}

TEST_CASE("lemma 1 holds along learning runs") {
    const auto m = fixtures::dense42();
    const auto res = solve_exact(m);
    auto c = default_run_config(m, Algorithm::Ssp);
    const long N = c.fast_schedule.validity_start();
    c.audit_from = N;
    c.checkpoint_steps = {N};
    const auto traces = run_replications(m, c, 10, {std::nullopt, res.beta, res.norm});
    const double K = lemma1_constant(m, res.norm, c.g);
    for (const auto& t : traces) {
        CHECK(lemma1_audit(t, res.norm, K, res.norm.alpha, N));
        CHECK(t.q_norm_sup >= t.q_norm_at_audit_start);
    }
}

TEST_CASE("cumulative step sums match direct summation") {
    const auto s = StepSchedule::paper_fast();
    const std::vector<long> steps{10000, 10001, 20000, 55555, 200000};
    const auto b = cumulative_step_sums(s, 10000, steps);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        long double direct = 0.0L;
        for (long n = 10000; n <= steps[k]; ++n) direct += 1.0L / std::pow(std::ceil(n / 2.0L), 0.65L);
        CHECK(std::abs(b[k] - static_cast<double>(direct)) <= 1e-12 * std::max(1.0, b[k]));
        if (k) CHECK(b[k] > b[k - 1]);
    }
    CHECK_THROWS_AS(cumulative_step_sums(s, 10, {5}), ConfigError);
}

TEST_CASE("geometric checkpoints and delta grid") {
    CHECK(geometric_checkpoints(10000, 200000) == std::vector<long>{10000, 20000, 40000, 80000, 160000, 200000});
    CHECK(geometric_checkpoints(10, 80) == std::vector<long>{10, 20, 40, 80});
    const auto g = default_delta_grid(2.0, 5.0);
    REQUIRE(g.size() == 8);
    CHECK(g.front() == doctest::Approx(0.02));
    CHECK(g.back() == 10.0);
    for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] / g[k - 1] == doctest::Approx(std::pow(500.0, 1.0 / 7.0)));
}

TEST_CASE("concentration envelope on the cycle") {
    const auto m = fixtures::cycle2();
    const auto res = solve_exact(m);
    auto c = default_run_config(m, Algorithm::Ssp);
    c.total_steps = 80000;
    ConcentrationOptions opt;
    opt.replications = 100;
    opt.bootstrap_resamples = 200;
    opt.delta_grid = {0.0, 1e-3, 1e-1, 2.0 * (17.0)};
    const auto rep = concentration_experiment(m, c, res, opt);
    CHECK(rep.passed());
    CHECK(rep.exceedance[1][0] > 0.9);  // delta = 0 at 2*n0
    for (const auto& row : rep.exceedance)
        for (double e : row) {
            CHECK(e >= 0.0);
            CHECK(e <= 1.0);
        }
    // Largest delta puts the envelope above the almost-sure bound.
    CHECK(rep.deltas.back() / (1.0 - rep.alpha) >= rep.lemma1_bound);
    for (const auto& row : rep.exceedance) CHECK(row.back() == 0.0);

    opt.replications = 99;
    CHECK_THROWS_AS(concentration_experiment(m, c, res, opt), SizeError);
}

TEST_CASE("concentration envelope is monotone in delta on dense 20x5") {
    const auto m = fixtures::dense42();
    const auto res = solve_exact(m);
    ConcentrationOptions opt;
    opt.replications = 200;
    opt.bootstrap_resamples = 100;
    const auto rep = concentration_experiment(m, default_run_config(m, Algorithm::Ssp), res, opt);
    CHECK(rep.monotone_in_delta);
    CHECK(rep.top_delta_zero_at_final);
    CHECK(rep.steps.size() == rep.b.size());
    for (std::size_t k = 1; k < rep.b.size(); ++k) CHECK(rep.b[k] > rep.b[k - 1]);
}

TEST_CASE("lambda concentration") {
    const auto c2 = fixtures::cycle2();
    auto c = default_run_config(c2, Algorithm::Ssp);
    c.total_steps = 100000;
    c.checkpoint_stride = 10000;
    const auto traces = run_replications(c2, c, 200);
    const auto rep = lambda_concentration(traces, 2.0, 10000, 500);
    CHECK(rep.q90.back() < 0.1);
    CHECK(rep.passed());

    // Solved start on dense 20x5: lambda stays within the slow-step noise floor.
    const auto m = fixtures::dense42();
    const auto res = solve_exact(m);
    auto s = default_run_config(m, Algorithm::Ssp);
    s.q_init = res.q_star_ssp;
    s.lambda_init = res.beta;
    s.checkpoint_stride = 10000;
    const auto runs = run_replications(m, s, 20);
    const double floor = 5.0 * s.slow_schedule.value(s.slow_schedule.cadence);
    for (const auto& t : runs)
        for (const auto& cp : t.checkpoints) CHECK(std::abs(cp.lambda - res.beta) < floor);

    CHECK_THROWS_AS(lambda_concentration({}, 2.0, 0), SizeError);
    auto ragged = traces;
    ragged[1].checkpoints.pop_back();
    CHECK_THROWS_AS(lambda_concentration(ragged, 2.0, 10000), DimensionError);
}

TEST_CASE("report files") {
    const auto dir = scratch_dir("reports");
    ComparisonReport empty;
    empty.beta = 0.1;
    emit_report(empty, (dir / "empty").string());
    CHECK(slurp(dir / "empty.csv") == "step,ssp_sq_error,rvi_sq_error,ssp_normalized,rvi_normalized\n");

    const auto m = fixtures::sparse7();
    const auto res = solve_exact(m);
    auto ssp = default_run_config(m, Algorithm::Ssp);
    ssp.total_steps = 20000;
    auto rvi = ssp;
    rvi.algorithm = Algorithm::Rvi;
    const auto rep = compare_rvi_ssp(m, ssp, rvi, 1, res);
    emit_report(rep, (dir / "a").string());
    const auto back = read_comparison_report((dir / "a.json").string());
    CHECK(back.beta == res.beta);
    CHECK(back.series.size() == rep.series.size());
    emit_report(back, (dir / "b").string());
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

    const auto c2 = fixtures::cycle2();
    const auto cres = solve_exact(c2);
    auto cc = default_run_config(c2, Algorithm::Ssp);
    cc.total_steps = 40000;
    ConcentrationOptions opt;
    opt.replications = 100;
    opt.bootstrap_resamples = 50;
    const auto env = concentration_experiment(c2, cc, cres, opt);
    emit_report(env, (dir / "e").string());
    const auto env_back = read_envelope_report((dir / "e.json").string());
    CHECK(env_back.exceedance == env.exceedance);
    emit_report(env_back, (dir / "f").string());
    CHECK(slurp(dir / "e.json") == slurp(dir / "f.json"));
    CHECK(slurp(dir / "e.csv") == slurp(dir / "f.csv"));

    CHECK_THROWS_AS(read_envelope_report((dir / "a.json").string()), ParseError);
    CHECK_THROWS_AS(emit_report(rep, (dir / "missing" / "x").string()), Error);
    fs::remove_all(dir);
}

}  // TEST_SUITE
