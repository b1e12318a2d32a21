#include "avgq/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "avgq/errors.hpp"
#include "avgq/stats.hpp"

namespace avgq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kFixedPointTol = 1e-10;

QTable difference(const QTable& a, const QTable& b) {
    QTable d = a;
    for (std::size_t k = 0; k < d.size(); ++k) d.values()[k] -= b.values()[k];
    return d;
}

}  // namespace

QTable q_star_of_lambda(const Mdp& mdp, double lambda, double tol, const QTable* warm_start) {
    return ssp_fixed_point(mdp, lambda, tol, 10000000, warm_start);
}

double estimate_lambda_lipschitz(const Mdp& mdp, const WeightedNorm& norm,
                                 const std::vector<double>& lambda_grid, double tol) {
    double L = 0.0;
    QTable prev;
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        QTable cur = q_star_of_lambda(mdp, lambda_grid[k], tol, k ? &prev : nullptr);
        if (k > 0) {
            const double dl = std::abs(lambda_grid[k] - lambda_grid[k - 1]);
            if (dl > 0.0) L = std::max(L, weighted_norm(difference(cur, prev), norm) / dl);
        }
        prev = std::move(cur);
    }
    return L;
}

// ---------------------------------------------------------------------------
// Comparison

double oscillation_metric(const std::vector<double>& errors, double early_fraction) {
    if (errors.empty() || !(errors.front() > 0.0)) return 0.0;
    const auto end = std::min(errors.size(),
                              static_cast<std::size_t>(std::floor(early_fraction *
                                                                  static_cast<double>(errors.size() - 1))) + 1);
    double running_min = errors.front();
    double rise = 0.0;
    for (std::size_t t = 1; t < end; ++t) {
        running_min = std::min(running_min, errors[t]);
        rise = std::max(rise, errors[t] - running_min);
    }
    return rise / errors.front();
}

ComparisonReport compare_rvi_ssp(const Mdp& mdp, const RunConfig& ssp_config,
                                 const RunConfig& rvi_config, std::uint64_t seed,
                                 const SolveResult& solved) {
    if (ssp_config.algorithm != Algorithm::Ssp || rvi_config.algorithm != Algorithm::Rvi) {
        throw ConfigError("compare_rvi_ssp: expected an (ssp, rvi) config pair");
    }
    if (!(ssp_config.fast_schedule == rvi_config.fast_schedule)) {
        throw ConfigError("compare_rvi_ssp: both algorithms must use the same fast step size");
    }
    if (ssp_config.total_steps != rvi_config.total_steps ||
        ssp_config.checkpoint_stride != rvi_config.checkpoint_stride ||
        ssp_config.checkpoint_steps != rvi_config.checkpoint_steps) {
        throw ConfigError("compare_rvi_ssp: checkpoint grids differ");
    }

    RunConfig ssp_c = ssp_config;
    RunConfig rvi_c = rvi_config;
    ssp_c.seed = seed;
    rvi_c.seed = seed;
    RunTargets ssp_t{solved.q_star_ssp, solved.beta, solved.norm};
    RunTargets rvi_t{solved.q_star_rvi, solved.beta, solved.norm};
    const Trace ssp = run_async(mdp, ssp_c, ssp_t);
    const Trace rvi = run_async(mdp, rvi_c, rvi_t);

    ComparisonReport rep;
    rep.instance = {mdp.generator().kind, mdp.generator().seed, mdp.num_states(), mdp.num_actions()};
    rep.seed = seed;
    rep.beta = solved.beta;
    std::vector<double> ssp_err, rvi_err;
    for (std::size_t c = 0; c < ssp.checkpoints.size(); ++c) {
        const auto& a = ssp.checkpoints[c];
        const auto& b = rvi.checkpoints[c];
        rep.series.push_back({a.step, a.sq_l2_error, b.sq_l2_error});
        ssp_err.push_back(a.sq_l2_error);
        rvi_err.push_back(b.sq_l2_error);
    }
    rep.ssp_initial_error = ssp_err.front();
    rep.rvi_initial_error = rvi_err.front();
    rep.ssp_final_error = ssp_err.back();
    rep.rvi_final_error = rvi_err.back();
    rep.ssp_min_error = *std::min_element(ssp_err.begin(), ssp_err.end());
    rep.rvi_min_error = *std::min_element(rvi_err.begin(), rvi_err.end());
    rep.ssp_final_lambda = ssp.final_lambda;
    rep.ssp_oscillation = oscillation_metric(ssp_err);
    rep.rvi_oscillation = oscillation_metric(rvi_err);
    return rep;
}

OscillationStudy oscillation_study(const Mdp& first, const SolveResult& first_solved,
                                   const Mdp& second, const SolveResult& second_solved,
                                   long total_steps, long checkpoint_stride, std::size_t num_seeds,
                                   std::size_t jobs) {
    auto metrics = [&](const Mdp& mdp, const SolveResult& solved) {
        RunConfig c = default_run_config(mdp, Algorithm::Ssp);
        c.total_steps = total_steps;
        c.checkpoint_stride = checkpoint_stride;
        RunTargets t;
        t.q_star = solved.q_star_ssp;
        const auto traces = run_replications(mdp, c, num_seeds, t, jobs);
        std::vector<double> out;
        for (const auto& tr : traces) {
            std::vector<double> e;
            for (const auto& cp : tr.checkpoints) e.push_back(cp.sq_l2_error);
            out.push_back(oscillation_metric(e));
        }
        return out;
    };
    OscillationStudy st;
    st.first = metrics(first, first_solved);
    st.second = metrics(second, second_solved);
    st.z = stats::mann_whitney_z(st.first, st.second);
    st.p_value = stats::normal_sf(st.z);
    st.significant = st.p_value < 0.05;
    return st;
}

// ---------------------------------------------------------------------------
// Boundedness

double lemma1_constant(const Mdp& mdp, const WeightedNorm& norm, double g) {
    double K = 0.0;
    for (State i = 0; i < mdp.num_states(); ++i) {
        for (Action u = 0; u < mdp.num_actions(); ++u) {
            K = std::max(K, (std::abs(mdp.cost(i, u)) + g) / norm.weight(i, u));
        }
    }
    return K;
}

double lemma1_bound(double norm_at_start, double K, double alpha) {
    return norm_at_start + K / (1.0 - alpha);
}

bool lemma1_audit(const Trace& trace, const WeightedNorm& norm, double K, double alpha, long N) {
    auto checkpoint_norm = [&](const Checkpoint& cp) {
        return cp.snapshot ? weighted_norm(*cp.snapshot, norm) : cp.q_norm;
    };

    double start = kNaN;
    if (trace.audit_from == N && std::isfinite(trace.q_norm_at_audit_start)) {
        start = trace.q_norm_at_audit_start;
    } else {
        for (const auto& cp : trace.checkpoints) {
            if (cp.step == N) start = checkpoint_norm(cp);
        }
    }
    if (!std::isfinite(start)) {
        throw ConfigError("lemma1_audit: trace has no record of ||Q_N|| at N = " + std::to_string(N));
    }
    const double bound = lemma1_bound(start, K, alpha);
    // Relative slack for the last bits of the norm evaluation only.
    const double limit = bound * (1.0 + 1e-12);

    for (const auto& cp : trace.checkpoints) {
        if (cp.step < N) continue;
        const double x = checkpoint_norm(cp);
        if (!(x <= limit)) return false;
    }
    if (trace.audit_from == N && std::isfinite(trace.q_norm_sup) && !(trace.q_norm_sup <= limit)) {
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Concentration

std::vector<double> cumulative_step_sums(const StepSchedule& schedule, long n0,
                                         const std::vector<long>& steps) {
    std::vector<double> out;
    out.reserve(steps.size());
    double sum = 0.0;
    long m = n0;
    for (long n : steps) {
        if (n < n0) throw ConfigError("cumulative_step_sums: step below n0");
        for (; m <= n; ++m) sum += schedule.value(m);
        out.push_back(sum);
    }
    return out;
}

std::vector<long> geometric_checkpoints(long n0, long total_steps) {
    if (n0 < 1) throw ConfigError("n0 must be >= 1");
    std::vector<long> out;
    for (long n = n0; n <= total_steps; n *= 2) out.push_back(n);
    if (out.empty() || out.back() != total_steps) {
        if (total_steps >= n0) out.push_back(total_steps);
    }
    return out;
}

std::vector<double> default_delta_grid(double initial_error, double bound) {
    const double lo = 0.01 * initial_error;
    const double hi = 2.0 * bound;
    if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("default_delta_grid: degenerate range");
    std::vector<double> g(8);
    for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / 7.0);
    }
    g.back() = hi;
    return g;
}

EnvelopeReport concentration_experiment(const Mdp& mdp, const RunConfig& config,
                                        const SolveResult& solved,
                                        const ConcentrationOptions& opt) {
    if (opt.replications < 100) {
        throw SizeError("concentration_experiment: need at least 100 replications");
    }
    if (config.algorithm != Algorithm::Ssp) throw ConfigError("concentration_experiment: SSP only");
    const long N = config.fast_schedule.validity_start();
    if (opt.n0 < N) throw ConfigError("concentration_experiment: n0 must be >= N = " + std::to_string(N));
    if (opt.n0 > config.total_steps) throw ConfigError("concentration_experiment: n0 beyond run length");

    EnvelopeReport rep;
    rep.n0 = opt.n0;
    rep.replications = opt.replications;
    rep.alpha = solved.norm.alpha;
    rep.K = lemma1_constant(mdp, solved.norm, config.g);
    rep.steps = geometric_checkpoints(opt.n0, config.total_steps);
    rep.b = cumulative_step_sums(config.fast_schedule, opt.n0, rep.steps);

    RunConfig c = config;
    c.checkpoint_steps = rep.steps;
    c.checkpoint_stride = config.total_steps + 1;
    c.record_snapshots = true;
    c.audit_from = N;
    RunTargets targets;
    targets.beta = solved.beta;
    targets.norm = solved.norm;
    const auto traces = run_replications(mdp, c, opt.replications, targets, opt.jobs);

    // errors[r][c] = ||Q_n - x*(lambda_n)||_w
    const std::size_t C = rep.steps.size();
    std::vector<std::vector<double>> errors(opt.replications, std::vector<double>(C));
    double start_norm = 0.0;
    for (std::size_t r = 0; r < traces.size(); ++r) {
        start_norm = std::max(start_norm, traces[r].q_norm_at_audit_start);
        std::size_t c_idx = 0;
        for (const auto& cp : traces[r].checkpoints) {
            if (c_idx < C && cp.step == rep.steps[c_idx]) {
                const QTable target = q_star_of_lambda(mdp, cp.lambda, kFixedPointTol, &solved.q_star_ssp);
                errors[r][c_idx] = weighted_norm(difference(*cp.snapshot, target), solved.norm);
                ++c_idx;
            }
        }
        if (c_idx != C) throw Error("concentration_experiment: missing checkpoints in trace");
    }
    rep.lemma1_bound = lemma1_bound(start_norm, rep.K, rep.alpha);

    std::vector<double> initial(opt.replications);
    for (std::size_t r = 0; r < opt.replications; ++r) initial[r] = errors[r][0];
    rep.initial_error = stats::mean(initial);

    rep.deltas = opt.delta_grid.empty() ? default_delta_grid(rep.initial_error, rep.lemma1_bound)
                                        : opt.delta_grid;
    std::sort(rep.deltas.begin(), rep.deltas.end());

    const double one_minus_alpha = 1.0 - rep.alpha;
    rep.exceedance.assign(C, std::vector<double>(rep.deltas.size(), 0.0));
    for (std::size_t ci = 0; ci < C; ++ci) {
        const double decay = std::exp(-one_minus_alpha * rep.b[ci]);
        for (std::size_t k = 0; k < rep.deltas.size(); ++k) {
            std::size_t count = 0;
            for (std::size_t r = 0; r < opt.replications; ++r) {
                const double envelope = decay * errors[r][0] + rep.deltas[k] / one_minus_alpha;
                if (errors[r][ci] > envelope) ++count;
            }
            rep.exceedance[ci][k] = static_cast<double>(count) / static_cast<double>(opt.replications);
        }
    }

    rep.monotone_in_delta = true;
    for (const auto& row : rep.exceedance) {
        for (std::size_t k = 1; k < row.size(); ++k) {
            if (row[k] > row[k - 1]) rep.monotone_in_delta = false;
        }
    }
    rep.top_delta_zero_at_final = rep.exceedance.back().back() == 0.0;

    auto medians_of = [&](const std::vector<std::size_t>* idx) {
        std::vector<double> med(C);
        for (std::size_t ci = 0; ci < C; ++ci) {
            std::vector<double> col;
            col.reserve(opt.replications);
            for (std::size_t r = 0; r < opt.replications; ++r) {
                col.push_back(errors[idx ? (*idx)[r] : r][ci]);
            }
            med[ci] = stats::median(std::move(col));
        }
        return med;
    };
    rep.median_error = medians_of(nullptr);

    Rng boot(opt.bootstrap_seed);
    std::size_t monotone = 0;
    for (std::size_t b = 0; b < opt.bootstrap_resamples; ++b) {
        const auto idx = stats::bootstrap_indices(opt.replications, boot);
        const auto med = medians_of(&idx);
        if (std::is_sorted(med.rbegin(), med.rend())) ++monotone;
    }
    rep.bootstrap_monotone_fraction =
        opt.bootstrap_resamples
            ? static_cast<double>(monotone) / static_cast<double>(opt.bootstrap_resamples)
            : 0.0;
    rep.median_non_increasing = rep.bootstrap_monotone_fraction >= 0.95;
    return rep;
}

LambdaEnvelopeReport lambda_concentration(const std::vector<Trace>& traces, double beta,
                                          long n_hat, std::size_t bootstrap_resamples,
                                          std::uint64_t bootstrap_seed) {
    if (traces.empty()) throw SizeError("lambda_concentration: no traces");
    LambdaEnvelopeReport rep;
    rep.n_hat = n_hat;
    rep.beta = beta;
    rep.replications = traces.size();

    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < traces[0].checkpoints.size(); ++c) {
        if (traces[0].checkpoints[c].step >= n_hat) {
            cols.push_back(c);
            rep.steps.push_back(traces[0].checkpoints[c].step);
        }
    }
    if (rep.steps.empty()) throw SizeError("lambda_concentration: no checkpoints at or after n_hat");
    std::vector<std::vector<double>> dev(traces.size());
    for (std::size_t r = 0; r < traces.size(); ++r) {
        if (traces[r].checkpoints.size() != traces[0].checkpoints.size()) {
            throw DimensionError("lambda_concentration: traces have different checkpoint grids");
        }
        for (std::size_t c : cols) {
            if (traces[r].checkpoints[c].step != traces[0].checkpoints[c].step) {
                throw DimensionError("lambda_concentration: traces have different checkpoint grids");
            }
            dev[r].push_back(std::abs(traces[r].checkpoints[c].lambda - beta));
        }
    }

    const std::size_t C = rep.steps.size();
    auto quantiles_at = [&](std::size_t c, const std::vector<std::size_t>* idx) {
        std::vector<double> col;
        col.reserve(traces.size());
        for (std::size_t r = 0; r < traces.size(); ++r) col.push_back(dev[idx ? (*idx)[r] : r][c]);
        return std::array<double, 3>{stats::quantile(col, 0.1), stats::quantile(col, 0.5),
                                     stats::quantile(col, 0.9)};
    };
    for (std::size_t c = 0; c < C; ++c) {
        const auto q = quantiles_at(c, nullptr);
        rep.q10.push_back(q[0]);
        rep.q50.push_back(q[1]);
        rep.q90.push_back(q[2]);
    }
    // Ties at machine precision count as non-increasing.
    auto leq = [](double a, double b) { return a <= b + 1e-12 * (1.0 + std::abs(b)); };
    rep.median_decays = leq(rep.q50.back(), rep.q50.front());
    rep.spread_shrinks = leq(rep.q90.back() - rep.q10.back(), rep.q90.front() - rep.q10.front());

    const std::size_t tail_begin = C >= 3 ? C - 3 : 0;
    Rng boot(bootstrap_seed);
    std::size_t good = 0;
    for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
        const auto idx = stats::bootstrap_indices(traces.size(), boot);
        bool ok = true;
        std::array<double, 3> prev = quantiles_at(tail_begin, &idx);
        for (std::size_t c = tail_begin + 1; c < C && ok; ++c) {
            const auto cur = quantiles_at(c, &idx);
            for (int k = 0; k < 3; ++k) ok = ok && leq(cur[k], prev[k]);
            prev = cur;
        }
        if (ok) ++good;
    }
    rep.bootstrap_tail_fraction =
        bootstrap_resamples ? static_cast<double>(good) / static_cast<double>(bootstrap_resamples) : 0.0;
    rep.tail_non_increasing = rep.bootstrap_tail_fraction >= 0.95;
    return rep;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

using nlohmann::json;

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double from_num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error("write to '" + path + "' failed");
}

json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

json header(const std::string& kind) {
    return json{{"format", "avgq-report"}, {"version", 1}, {"kind", kind}};
}

void check_header(const json& j, const std::string& kind) {
    if (j.value("format", "") != "avgq-report" || j.value("version", 0) != 1 ||
        j.value("kind", "") != kind) {
        throw ParseError("not an avgq " + kind + " report", 0);
    }
}

}  // namespace

void emit_report(const ComparisonReport& rep, const std::string& path) {
    json j = header("comparison");
    j["instance"] = {{"generator", rep.instance.generator},
                     {"seed", rep.instance.seed},
                     {"states", rep.instance.num_states},
                     {"actions", rep.instance.num_actions}};
    j["seed"] = rep.seed;
    j["beta"] = rep.beta;
    j["ssp"] = {{"initial_error", num(rep.ssp_initial_error)},
                {"final_error", num(rep.ssp_final_error)},
                {"min_error", num(rep.ssp_min_error)},
                {"final_lambda", rep.ssp_final_lambda},
                {"oscillation", rep.ssp_oscillation}};
    j["rvi"] = {{"initial_error", num(rep.rvi_initial_error)},
                {"final_error", num(rep.rvi_final_error)},
                {"min_error", num(rep.rvi_min_error)},
                {"oscillation", rep.rvi_oscillation}};
    json steps = json::array(), ssp = json::array(), rvi = json::array();
    std::string csv = "step,ssp_sq_error,rvi_sq_error,ssp_normalized,rvi_normalized\n";
    for (const auto& p : rep.series) {
        steps.push_back(p.step);
        ssp.push_back(num(p.ssp_sq_error));
        rvi.push_back(num(p.rvi_sq_error));
        csv += std::to_string(p.step) + ',' + format_double(p.ssp_sq_error) + ',' +
               format_double(p.rvi_sq_error) + ',' +
               format_double(p.ssp_sq_error / rep.ssp_initial_error) + ',' +
               format_double(p.rvi_sq_error / rep.rvi_initial_error) + '\n';
    }
    j["series"] = {{"step", steps}, {"ssp_sq_error", ssp}, {"rvi_sq_error", rvi}};
    write_text(path + ".json", j.dump(2) + "\n");
    write_text(path + ".csv", csv);
}

ComparisonReport read_comparison_report(const std::string& json_path) {
    const json j = read_json(json_path);
    check_header(j, "comparison");
    try {
        ComparisonReport rep;
        const auto& inst = j.at("instance");
        rep.instance = {inst.at("generator").get<std::string>(), inst.at("seed").get<std::uint64_t>(),
                        inst.at("states").get<std::size_t>(), inst.at("actions").get<std::size_t>()};
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.beta = j.at("beta").get<double>();
        const auto& s = j.at("ssp");
        rep.ssp_initial_error = from_num(s.at("initial_error"));
        rep.ssp_final_error = from_num(s.at("final_error"));
        rep.ssp_min_error = from_num(s.at("min_error"));
        rep.ssp_final_lambda = s.at("final_lambda").get<double>();
        rep.ssp_oscillation = s.at("oscillation").get<double>();
        const auto& v = j.at("rvi");
        rep.rvi_initial_error = from_num(v.at("initial_error"));
        rep.rvi_final_error = from_num(v.at("final_error"));
        rep.rvi_min_error = from_num(v.at("min_error"));
        rep.rvi_oscillation = v.at("oscillation").get<double>();
        const auto& ser = j.at("series");
        const auto& steps = ser.at("step");
        for (std::size_t k = 0; k < steps.size(); ++k) {
            rep.series.push_back({steps[k].get<long>(), from_num(ser.at("ssp_sq_error").at(k)),
                                  from_num(ser.at("rvi_sq_error").at(k))});
        }
        return rep;
    } catch (const json::exception& e) {
        throw ParseError(json_path + ": " + e.what(), 0);
    }
}

void emit_report(const EnvelopeReport& rep, const std::string& path) {
    json j = header("envelope");
    j["n0"] = rep.n0;
    j["replications"] = rep.replications;
    j["alpha"] = rep.alpha;
    j["K"] = rep.K;
    j["lemma1_bound"] = rep.lemma1_bound;
    j["initial_error"] = num(rep.initial_error);
    j["steps"] = rep.steps;
    j["b"] = rep.b;
    j["deltas"] = rep.deltas;
    j["exceedance"] = rep.exceedance;
    j["median_error"] = rep.median_error;
    j["bootstrap_monotone_fraction"] = rep.bootstrap_monotone_fraction;
    j["assertions"] = {{"monotone_in_delta", rep.monotone_in_delta},
                       {"top_delta_zero_at_final", rep.top_delta_zero_at_final},
                       {"median_non_increasing", rep.median_non_increasing}};

    std::string csv = "step,b,median_error";
    for (double d : rep.deltas) csv += ",exceed_" + format_double(d);
    csv += '\n';
    for (std::size_t c = 0; c < rep.steps.size(); ++c) {
        csv += std::to_string(rep.steps[c]) + ',' + format_double(rep.b[c]) + ',' +
               format_double(rep.median_error[c]);
        for (double e : rep.exceedance[c]) csv += ',' + format_double(e);
        csv += '\n';
    }
    write_text(path + ".json", j.dump(2) + "\n");
    write_text(path + ".csv", csv);
}

EnvelopeReport read_envelope_report(const std::string& json_path) {
    const json j = read_json(json_path);
    check_header(j, "envelope");
    try {
        EnvelopeReport rep;
        rep.n0 = j.at("n0").get<long>();
        rep.replications = j.at("replications").get<std::size_t>();
        rep.alpha = j.at("alpha").get<double>();
        rep.K = j.at("K").get<double>();
        rep.lemma1_bound = j.at("lemma1_bound").get<double>();
        rep.initial_error = from_num(j.at("initial_error"));
        rep.steps = j.at("steps").get<std::vector<long>>();
        rep.b = j.at("b").get<std::vector<double>>();
        rep.deltas = j.at("deltas").get<std::vector<double>>();
        rep.exceedance = j.at("exceedance").get<std::vector<std::vector<double>>>();
        rep.median_error = j.at("median_error").get<std::vector<double>>();
        rep.bootstrap_monotone_fraction = j.at("bootstrap_monotone_fraction").get<double>();
        const auto& a = j.at("assertions");
        rep.monotone_in_delta = a.at("monotone_in_delta").get<bool>();
        rep.top_delta_zero_at_final = a.at("top_delta_zero_at_final").get<bool>();
        rep.median_non_increasing = a.at("median_non_increasing").get<bool>();
        return rep;
    } catch (const json::exception& e) {
        throw ParseError(json_path + ": " + e.what(), 0);
    }
}

void emit_report(const LambdaEnvelopeReport& rep, const std::string& path) {
    json j = header("lambda-envelope");
    j["n_hat"] = rep.n_hat;
    j["beta"] = rep.beta;
    j["replications"] = rep.replications;
    j["steps"] = rep.steps;
    j["q10"] = rep.q10;
    j["q50"] = rep.q50;
    j["q90"] = rep.q90;
    j["bootstrap_tail_fraction"] = rep.bootstrap_tail_fraction;
    j["assertions"] = {{"median_decays", rep.median_decays},
                       {"spread_shrinks", rep.spread_shrinks},
                       {"tail_non_increasing", rep.tail_non_increasing}};
    std::string csv = "step,q10,q50,q90\n";
    for (std::size_t c = 0; c < rep.steps.size(); ++c) {
        csv += std::to_string(rep.steps[c]) + ',' + format_double(rep.q10[c]) + ',' +
               format_double(rep.q50[c]) + ',' + format_double(rep.q90[c]) + '\n';
    }
    write_text(path + ".json", j.dump(2) + "\n");
    write_text(path + ".csv", csv);
}

}  // namespace avgq
