#include "avgq/qlearn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "avgq/errors.hpp"

namespace avgq {

std::string to_string(Algorithm a) { return a == Algorithm::Ssp ? "ssp" : "rvi"; }

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "ssp") return Algorithm::Ssp;
    if (s == "rvi") return Algorithm::Rvi;
    throw ConfigError("unknown algorithm '" + s + "'");
}

RunConfig default_run_config(const Mdp& mdp, Algorithm algorithm) {
    RunConfig c;
    c.algorithm = algorithm;
    c.slow_schedule = StepSchedule::paper_slow(mdp.num_states(), mdp.num_actions());
    c.g = default_projection_radius(mdp);
    c.ref_pair = {mdp.ref_state(), 0};
    return c;
}

void validate_config(const RunConfig& c, const Mdp& mdp) {
    if (c.total_steps < 0) throw ConfigError("total_steps must be >= 0");
    if (!(c.g > mdp.max_abs_cost())) {
        throw ConfigError("projection radius g = " + format_double(c.g) + " must exceed max|k| = " +
                          format_double(mdp.max_abs_cost()));
    }
    if (!(std::abs(c.lambda_init) <= c.g)) throw ConfigError("lambda_init must lie in [-g, g]");
    if (c.checkpoint_stride < 1) throw ConfigError("checkpoint_stride must be >= 1");
    if (c.behavior.kind == BehaviorPolicy::Kind::EpsilonGreedy &&
        !(c.behavior.epsilon >= 0.0 && c.behavior.epsilon <= 1.0)) {
        throw ConfigError("epsilon must lie in [0, 1]");
    }
    if (c.ref_pair.first >= mdp.num_states() || c.ref_pair.second >= mdp.num_actions()) {
        throw ConfigError("ref_pair out of range");
    }
    if (c.q_init && (c.q_init->num_states() != mdp.num_states() ||
                     c.q_init->num_actions() != mdp.num_actions())) {
        throw ConfigError("q_init shape does not match the instance");
    }
    c.fast_schedule.validate();
    if (c.algorithm == Algorithm::Ssp) c.slow_schedule.validate();
}

// ---------------------------------------------------------------------------
// Config text form

namespace {

using nlohmann::json;

json schedule_json(const StepSchedule& s) {
    return json{{"kind", to_string(s.kind)},
                {"exponent", s.exponent},
                {"offset", s.offset},
                {"scale", s.scale},
                {"cadence", s.cadence}};
}

StepSchedule schedule_from_json(const json& j, const StepSchedule& fallback) {
    StepSchedule s = fallback;
    if (j.contains("kind")) s.kind = schedule_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("exponent")) s.exponent = j.at("exponent").get<double>();
    if (j.contains("offset")) s.offset = j.at("offset").get<double>();
    if (j.contains("scale")) s.scale = j.at("scale").get<double>();
    if (j.contains("cadence")) s.cadence = j.at("cadence").get<long>();
    return s;
}

}  // namespace

std::string config_to_text(const RunConfig& c) {
    json j;
    j["format"] = "avgq-run-config";
    j["version"] = 1;
    j["algorithm"] = to_string(c.algorithm);
    j["total_steps"] = c.total_steps;
    j["fast_schedule"] = schedule_json(c.fast_schedule);
    j["slow_schedule"] = schedule_json(c.slow_schedule);
    j["g"] = c.g;
    j["behavior"] = {{"kind", c.behavior.kind == BehaviorPolicy::Kind::UniformRandom
                                  ? "uniform-random"
                                  : "epsilon-greedy"},
                     {"epsilon", c.behavior.epsilon}};
    j["seed"] = c.seed;
    if (c.q_init) {
        json rows = json::array();
        for (State i = 0; i < c.q_init->num_states(); ++i) {
            json row = json::array();
            for (Action u = 0; u < c.q_init->num_actions(); ++u) row.push_back((*c.q_init)(i, u));
            rows.push_back(row);
        }
        j["q_init"] = rows;
    } else {
        j["q_init"] = nullptr;
    }
    j["lambda_init"] = c.lambda_init;
    j["ref_pair"] = {c.ref_pair.first, c.ref_pair.second};
    j["checkpoint_stride"] = c.checkpoint_stride;
    j["checkpoint_steps"] = c.checkpoint_steps;
    j["record_snapshots"] = c.record_snapshots;
    j["audit_from"] = c.audit_from;
    return j.dump(2) + "\n";
}

RunConfig config_from_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("run config: ") + e.what(), 0);
    }
    try {
        if (j.value("format", std::string("avgq-run-config")) != "avgq-run-config" ||
            j.value("version", 1) != 1) {
            throw ParseError("not an avgq-run-config v1 document", 0);
        }
        RunConfig c;
        if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j["algorithm"].get<std::string>());
        c.total_steps = j.value("total_steps", c.total_steps);
        if (j.contains("fast_schedule")) c.fast_schedule = schedule_from_json(j["fast_schedule"], c.fast_schedule);
        if (j.contains("slow_schedule")) c.slow_schedule = schedule_from_json(j["slow_schedule"], c.slow_schedule);
        c.g = j.value("g", c.g);
        if (j.contains("behavior")) {
            const auto& b = j["behavior"];
            const auto kind = b.value("kind", std::string("uniform-random"));
            if (kind == "uniform-random") {
                c.behavior.kind = BehaviorPolicy::Kind::UniformRandom;
            } else if (kind == "epsilon-greedy") {
                c.behavior.kind = BehaviorPolicy::Kind::EpsilonGreedy;
            } else {
                throw ConfigError("unknown behavior policy '" + kind + "'");
            }
            c.behavior.epsilon = b.value("epsilon", c.behavior.epsilon);
        }
        c.seed = j.value("seed", c.seed);
        if (j.contains("q_init") && !j["q_init"].is_null()) {
            const auto& rows = j["q_init"];
            const std::size_t d = rows.size();
            const std::size_t r = d ? rows.at(0).size() : 0;
            std::vector<double> vals;
            for (const auto& row : rows) {
                if (row.size() != r) throw ParseError("ragged q_init", 0);
                for (const auto& x : row) vals.push_back(x.get<double>());
            }
            c.q_init = QTable(d, r, std::move(vals));
        }
        c.lambda_init = j.value("lambda_init", c.lambda_init);
        if (j.contains("ref_pair")) {
            c.ref_pair = {j["ref_pair"].at(0).get<State>(), j["ref_pair"].at(1).get<Action>()};
        }
        c.checkpoint_stride = j.value("checkpoint_stride", c.checkpoint_stride);
        if (j.contains("checkpoint_steps")) c.checkpoint_steps = j["checkpoint_steps"].get<std::vector<long>>();
        c.record_snapshots = j.value("record_snapshots", c.record_snapshots);
        c.audit_from = j.value("audit_from", c.audit_from);
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what(), 0);
    }
}

std::uint64_t config_digest(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_to_text(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Single-step updates

double project_lambda(double lambda, double g) { return std::clamp(lambda, -g, g); }

void ssp_q_update(QTable& q, double lambda, State i, Action u, State j, const Mdp& mdp,
                  double a_n) {
    const double continuation = (j != mdp.ref_state()) ? q.min_at(j) : 0.0;
    q(i, u) += a_n * (mdp.cost(i, u) + continuation - lambda - q(i, u));
}

QTable ssp_q_step(QTable q, double lambda, State i, Action u, State j, const Mdp& mdp,
                  double a_n) {
    ssp_q_update(q, lambda, i, u, j, mdp, a_n);
    return q;
}

double ssp_lambda_step(const QTable& q, double lambda, double a_slow, double g, State i0) {
    return project_lambda(lambda + a_slow * q.min_at(i0), g);
}

void rvi_q_update(QTable& q, State i, Action u, State j, const Mdp& mdp, double a_n,
                  std::pair<State, Action> ref_pair) {
    const double offset = q(ref_pair.first, ref_pair.second);
    q(i, u) += a_n * (mdp.cost(i, u) + q.min_at(j) - offset - q(i, u));
}

QTable rvi_q_step(QTable q, State i, Action u, State j, const Mdp& mdp, double a_n,
                  std::pair<State, Action> ref_pair) {
    rvi_q_update(q, i, u, j, mdp, a_n, ref_pair);
    return q;
}

Action choose_action(const BehaviorPolicy& behavior, const QTable& q, State i, Rng& rng) {
    const std::size_t r = q.num_actions();
    if (behavior.kind == BehaviorPolicy::Kind::EpsilonGreedy && rng.uniform() >= behavior.epsilon) {
        return q.argmin_at(i);
    }
    return static_cast<Action>(rng.below(r));
}

// ---------------------------------------------------------------------------
// Runner

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Checkpoint make_checkpoint(long step, const QTable& q, double lambda, long state, long action,
                           double step_size, const RunTargets& targets, bool snapshot) {
    Checkpoint cp;
    cp.step = step;
    cp.lambda = lambda;
    cp.state = state;
    cp.action = action;
    cp.step_size = step_size;
    cp.q_norm = targets.norm ? weighted_norm(q, *targets.norm) : kNaN;
    if (targets.q_star) {
        cp.sq_l2_error = squared_l2_distance(q, *targets.q_star);
        if (targets.norm) {
            QTable diff = q;
            for (std::size_t k = 0; k < diff.size(); ++k) diff.values()[k] -= targets.q_star->values()[k];
            cp.weighted_error = weighted_norm(diff, *targets.norm);
        } else {
            cp.weighted_error = kNaN;
        }
    } else {
        cp.sq_l2_error = kNaN;
        cp.weighted_error = kNaN;
    }
    cp.lambda_error = targets.beta ? lambda - *targets.beta : kNaN;
    if (snapshot) cp.snapshot = q;
    return cp;
}

}  // namespace

Trace run_async(const Mdp& mdp, const RunConfig& config, const RunTargets& targets) {
    validate_config(config, mdp);
    const State i0 = mdp.ref_state();
    const bool ssp = config.algorithm == Algorithm::Ssp;

    Rng rng(config.seed);
    QTable q = config.q_init ? *config.q_init : QTable::zeros_like(mdp);
    double lambda = config.lambda_init;
    auto reported_lambda = [&] { return ssp ? lambda : q(config.ref_pair.first, config.ref_pair.second); };

    std::vector<long> extra = config.checkpoint_steps;
    std::sort(extra.begin(), extra.end());
    auto next_extra = extra.begin();

    Trace trace;
    trace.algorithm = config.algorithm;
    trace.seed = config.seed;
    trace.config_digest = config_digest(config);
    trace.audit_from = config.audit_from;
    trace.q_norm_at_audit_start = kNaN;
    trace.q_norm_sup = kNaN;
    trace.checkpoints.push_back(
        make_checkpoint(0, q, reported_lambda(), -1, -1, 0.0, targets, config.record_snapshots));

    const bool audit = config.audit_from > 0 && targets.norm.has_value();
    auto entry_norm = [&](State i, Action u) { return std::abs(q(i, u)) / targets.norm->weight(i, u); };

    State x = i0;
    for (long n = 1; n <= config.total_steps; ++n) {
        const Action u = choose_action(config.behavior, q, x, rng);
        const State j = sample_transition(mdp, x, u, rng);
        const double a = config.fast_schedule.value(n);

        if (ssp) {
            double next_lambda = lambda;
            if (config.slow_schedule.updates_at(n)) {
                next_lambda = ssp_lambda_step(q, lambda, config.slow_schedule.value(n), config.g, i0);
            }
            ssp_q_update(q, lambda, x, u, j, mdp, a);
            lambda = next_lambda;
        } else {
            rvi_q_update(q, x, u, j, mdp, a, config.ref_pair);
        }

        if (audit && n >= config.audit_from) {
            if (n == config.audit_from) {
                trace.q_norm_at_audit_start = weighted_norm(q, *targets.norm);
                trace.q_norm_sup = trace.q_norm_at_audit_start;
            } else {
                // Only (x,u) moved, so the running sup needs just that entry.
                trace.q_norm_sup = std::max(trace.q_norm_sup, entry_norm(x, u));
            }
        }

        bool record = n % config.checkpoint_stride == 0 || n == config.total_steps;
        while (next_extra != extra.end() && *next_extra <= n) {
            if (*next_extra == n) record = true;
            ++next_extra;
        }
        if (record) {
            trace.checkpoints.push_back(make_checkpoint(n, q, reported_lambda(), static_cast<long>(x),
                                                        static_cast<long>(u), a, targets,
                                                        config.record_snapshots));
        }
        x = j;
    }
    trace.final_lambda = reported_lambda();
    trace.final_q = std::move(q);
    return trace;
}

std::vector<Trace> run_replications(const Mdp& mdp, const RunConfig& config, std::size_t count,
                                    const RunTargets& targets, std::size_t jobs) {
    validate_config(config, mdp);
    std::vector<Trace> traces(count);
    auto work = [&](std::size_t worker, std::size_t stride) {
        for (std::size_t r = worker; r < count; r += stride) {
            RunConfig c = config;
            c.seed = derive_seed(config.seed, r);
            traces[r] = run_async(mdp, c, targets);
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        work(0, 1);
        return traces;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work, w, jobs);
    }
    return traces;
}

MeanFieldResult run_mean_field(const Mdp& mdp, const RunConfig& config, double tol,
                               long max_iter) {
    validate_config(config, mdp);
    const State i0 = mdp.ref_state();
    QTable q = config.q_init ? *config.q_init : QTable::zeros_like(mdp);
    double lambda = config.lambda_init;
    double residual = std::numeric_limits<double>::infinity();
    for (long n = 1; n <= max_iter; ++n) {
        const QTable target = ssp_bellman_q(mdp, q, lambda);
        residual = sup_distance(target, q);
        const double f = q.min_at(i0);
        if (residual <= tol && std::abs(f) <= tol) return {std::move(q), lambda, n - 1, residual};

        const double a = config.fast_schedule.value(n);
        double next_lambda = lambda;
        if (config.slow_schedule.updates_at(n)) {
            next_lambda = project_lambda(lambda + config.slow_schedule.value(n) * f, config.g);
        }
        for (std::size_t k = 0; k < q.size(); ++k) {
            q.values()[k] += a * (target.values()[k] - q.values()[k]);
        }
        lambda = next_lambda;
    }
    throw NonConvergence("mean-field iteration did not converge", residual, max_iter);
}

// ---------------------------------------------------------------------------
// Trace text form

namespace {

constexpr const char* kTraceColumns =
    "step,sq_l2_error,weighted_error,lambda,lambda_error,state,action,step_size,q_norm";

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

double parse_num(const std::string& s, long line) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid number '" + s + "'", line);
    }
    return x;
}

long parse_long(const std::string& s, long line) {
    long x = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid integer '" + s + "'", line);
    }
    return x;
}

}  // namespace

void write_trace(std::ostream& out, const Trace& t) {
    out << "# avgq-trace 1\n";
    out << "# algorithm " << to_string(t.algorithm) << '\n';
    out << "# seed " << t.seed << '\n';
    out << "# config_digest " << hex64(t.config_digest) << '\n';
    out << "# final_lambda " << format_double(t.final_lambda) << '\n';
    out << "# audit_from " << t.audit_from << '\n';
    out << "# q_norm_at_audit_start " << format_double(t.q_norm_at_audit_start) << '\n';
    out << "# q_norm_sup " << format_double(t.q_norm_sup) << '\n';
    out << "# final_q " << t.final_q.num_states() << ' ' << t.final_q.num_actions();
    for (double v : t.final_q.values()) out << ' ' << format_double(v);
    out << '\n';
    out << kTraceColumns << '\n';
    for (const auto& c : t.checkpoints) {
        out << c.step << ',' << format_double(c.sq_l2_error) << ',' << format_double(c.weighted_error)
            << ',' << format_double(c.lambda) << ',' << format_double(c.lambda_error) << ','
            << c.state << ',' << c.action << ',' << format_double(c.step_size) << ','
            << format_double(c.q_norm) << '\n';
    }
}

Trace read_trace(std::istream& in) {
    Trace t;
    std::string line;
    long lineno = 0;
    bool header_seen = false;
    bool columns_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            std::string value;
            if (key == "avgq-trace") {
                ss >> value;
                if (value != "1") throw ParseError("unsupported trace version " + value, lineno);
                header_seen = true;
            } else if (key == "algorithm") {
                ss >> value;
                t.algorithm = algorithm_from_string(value);
            } else if (key == "seed") {
                ss >> value;
                t.seed = std::stoull(value);
            } else if (key == "config_digest") {
                ss >> value;
                t.config_digest = std::stoull(value, nullptr, 16);
            } else if (key == "final_lambda") {
                ss >> value;
                t.final_lambda = parse_num(value, lineno);
            } else if (key == "audit_from") {
                ss >> value;
                t.audit_from = parse_long(value, lineno);
            } else if (key == "q_norm_at_audit_start") {
                ss >> value;
                t.q_norm_at_audit_start = parse_num(value, lineno);
            } else if (key == "q_norm_sup") {
                ss >> value;
                t.q_norm_sup = parse_num(value, lineno);
            } else if (key == "final_q") {
                std::size_t d = 0, r = 0;
                ss >> d >> r;
                std::vector<double> vals;
                while (ss >> value) vals.push_back(parse_num(value, lineno));
                t.final_q = QTable(d, r, std::move(vals));
            }
            continue;
        }
        if (!columns_seen) {
            if (line != kTraceColumns) throw ParseError("unexpected trace column header", lineno);
            columns_seen = true;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 9) throw ParseError("trace row needs 9 fields", lineno);
        Checkpoint c;
        c.step = parse_long(f[0], lineno);
        c.sq_l2_error = parse_num(f[1], lineno);
        c.weighted_error = parse_num(f[2], lineno);
        c.lambda = parse_num(f[3], lineno);
        c.lambda_error = parse_num(f[4], lineno);
        c.state = parse_long(f[5], lineno);
        c.action = parse_long(f[6], lineno);
        c.step_size = parse_num(f[7], lineno);
        c.q_norm = parse_num(f[8], lineno);
        t.checkpoints.push_back(std::move(c));
    }
    if (!header_seen || !columns_seen) throw ParseError("not an avgq trace", lineno);
    return t;
}

}  // namespace avgq
