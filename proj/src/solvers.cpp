#include "avgq/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "avgq/errors.hpp"
#include "avgq/rng.hpp"

namespace avgq {

QTable::QTable(std::size_t num_states, std::size_t num_actions, std::vector<double> values)
    : d_(num_states), r_(num_actions), q_(std::move(values)) {
    if (q_.size() != d_ * r_) {
        throw DimensionError("QTable: " + std::to_string(q_.size()) + " values for " +
                             std::to_string(d_) + "x" + std::to_string(r_));
    }
}

double QTable::min_at(State i) const noexcept {
    const double* row = q_.data() + i * r_;
    return *std::min_element(row, row + r_);
}

Action QTable::argmin_at(State i) const noexcept {
    const double* row = q_.data() + i * r_;
    // min_element returns the first minimiser, i.e. the lowest action index.
    return static_cast<Action>(std::min_element(row, row + r_) - row);
}

Policy QTable::greedy_policy() const {
    Policy pol{std::vector<Action>(d_)};
    for (State i = 0; i < d_; ++i) pol.action[i] = argmin_at(i);
    return pol;
}

double sup_distance(const QTable& a, const QTable& b) {
    if (!a.same_shape(b)) throw DimensionError("sup_distance: shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    }
    return m;
}

double squared_l2_distance(const QTable& a, const QTable& b) {
    if (!a.same_shape(b)) throw DimensionError("squared_l2_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double e = a.values()[k] - b.values()[k];
        s += e * e;
    }
    return s;
}

double weighted_norm(const QTable& q, const WeightedNorm& norm) {
    if (q.num_states() != norm.num_states || q.num_actions() != norm.num_actions ||
        norm.weights.size() != q.size()) {
        throw DimensionError("weighted_norm: table and weights have different shapes");
    }
    double m = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        m = std::max(m, std::abs(q.values()[k]) / norm.weights[k]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Bellman operators

namespace {

std::vector<double> state_minima(const QTable& q) {
    std::vector<double> m(q.num_states());
    for (State j = 0; j < q.num_states(); ++j) m[j] = q.min_at(j);
    return m;
}

/// sum_{j != i0} p(j|i,u) v(j)
double truncated_expectation(const Mdp& mdp, State i, Action u, std::span<const double> v) {
    const auto row = mdp.row(i, u);
    const State i0 = mdp.ref_state();
    double s = 0.0;
    for (State j = 0; j < row.size(); ++j) {
        if (j != i0) s += row[j] * v[j];
    }
    return s;
}

double full_expectation(const Mdp& mdp, State i, Action u, std::span<const double> v) {
    const auto row = mdp.row(i, u);
    double s = 0.0;
    for (State j = 0; j < row.size(); ++j) s += row[j] * v[j];
    return s;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

ValueFunction value_iteration_from(const Mdp& mdp, double lambda, double tol, long max_iter,
                                   std::vector<double> v, IterationLog* log) {
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        auto next = ssp_bellman_v(mdp, v, lambda);
        residual = sup_diff(next, v);
        if (log != nullptr) {
            std::vector<double> inc(v.size());
            for (std::size_t k = 0; k < v.size(); ++k) inc[k] = next[k] - v[k];
            log->increments.push_back(std::move(inc));
        }
        v = std::move(next);
        if (residual <= tol) return {std::move(v)};
    }
    throw NonConvergence("ssp_value_iteration did not converge", residual, max_iter);
}

}  // namespace

QTable ssp_bellman_q(const Mdp& mdp, const QTable& q, double lambda) {
    if (q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions()) {
        throw DimensionError("ssp_bellman_q: table shape does not match instance");
    }
    const auto minima = state_minima(q);
    QTable out(mdp.num_states(), mdp.num_actions());
    for (State i = 0; i < mdp.num_states(); ++i) {
        for (Action u = 0; u < mdp.num_actions(); ++u) {
            out(i, u) = mdp.cost(i, u) - lambda + truncated_expectation(mdp, i, u, minima);
        }
    }
    return out;
}

std::vector<double> ssp_bellman_v(const Mdp& mdp, std::span<const double> v, double lambda) {
    if (v.size() != mdp.num_states()) throw DimensionError("ssp_bellman_v: length mismatch");
    std::vector<double> out(mdp.num_states());
    for (State i = 0; i < mdp.num_states(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Action u = 0; u < mdp.num_actions(); ++u) {
            best = std::min(best, mdp.cost(i, u) + truncated_expectation(mdp, i, u, v));
        }
        out[i] = best - lambda;
    }
    return out;
}

ValueFunction ssp_value_iteration(const Mdp& mdp, double lambda, double tol, long max_iter,
                                  IterationLog* log) {
    return value_iteration_from(mdp, lambda, tol, max_iter,
                                std::vector<double>(mdp.num_states(), 0.0), log);
}

// ---------------------------------------------------------------------------
// Average cost

StepSchedule default_coupled_schedule(const Mdp& mdp) {
    // One lambda update per sweep; the gain starts well below the inverse of
    // the return time to i0 so that V can follow lambda.
    const double scale = 0.5 / static_cast<double>(mdp.num_states());
    return StepSchedule::power_law(scale, 0.51, 1.0, 1);
}

CoupledResult coupled_vi(const Mdp& mdp, const StepSchedule& lambda_schedule, double tol,
                         long max_iter) {
    lambda_schedule.validate();
    const State i0 = mdp.ref_state();
    std::vector<double> v(mdp.num_states(), 0.0);
    double lambda = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    for (long n = 1; n <= max_iter; ++n) {
        auto next = ssp_bellman_v(mdp, v, lambda);
        residual = sup_diff(next, v);
        if (lambda_schedule.updates_at(n)) lambda += lambda_schedule.value(n) * v[i0];
        v = std::move(next);
        if (residual <= tol && std::abs(v[i0]) <= tol) {
            return {{std::move(v)}, lambda, n, residual};
        }
    }
    throw NonConvergence("coupled_vi did not converge (|V(i0)| = " +
                             std::to_string(std::abs(v[i0])) + ")",
                         residual, max_iter);
}

double default_projection_radius(const Mdp& mdp) { return mdp.max_abs_cost() + 1.0; }

double optimal_average_cost_bisection(const Mdp& mdp, double g, double tol) {
    if (!(g > 0.0)) throw ConfigError("bisection: g must be positive");
    const State i0 = mdp.ref_state();
    const double inner_tol = 0.1 * tol;
    constexpr long kInnerMax = 10000000;

    std::vector<double> warm(mdp.num_states(), 0.0);
    auto root_fn = [&](double lambda) {
        auto v = value_iteration_from(mdp, lambda, inner_tol, kInnerMax, warm, nullptr);
        warm = v.v;
        return v.v[i0];
    };

    double lo = -g;
    double hi = g;
    const double f_lo = root_fn(lo);
    if (std::abs(f_lo) <= tol) return lo;
    const double f_hi = root_fn(hi);
    if (std::abs(f_hi) <= tol) return hi;
    if (!(f_lo > 0.0 && f_hi < 0.0)) {
        throw ConfigError("bisection: root not bracketed by [-g, g] (V(i0) = " +
                          format_double(f_lo) + ", " + format_double(f_hi) + ")");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = root_fn(mid);
        if (std::abs(f) <= tol) return mid;
        (f > 0.0 ? lo : hi) = mid;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) {
            return 0.5 * (lo + hi);
        }
    }
    return 0.5 * (lo + hi);
}

std::pair<double, Policy> policy_enumeration_oracle(const Mdp& mdp) {
    const std::size_t d = mdp.num_states();
    const std::size_t r = mdp.num_actions();
    std::size_t count = 1;
    for (std::size_t i = 0; i < d; ++i) {
        if (count > kMaxEnumeratedPolicies / r + 1) {
            count = kMaxEnumeratedPolicies + 1;
            break;
        }
        count *= r;
    }
    if (count > kMaxEnumeratedPolicies) {
        throw SizeError("policy_enumeration_oracle: r^d exceeds " +
                        std::to_string(kMaxEnumeratedPolicies));
    }

    Policy current{std::vector<Action>(d, 0)};
    Policy best = current;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < count; ++n) {
        // Mixed-radix counter, state 0 least significant.
        std::size_t code = n;
        for (std::size_t i = 0; i < d; ++i) {
            current.action[i] = code % r;
            code /= r;
        }
        const double c = average_cost_of_policy(mdp, current);
        if (c < best_cost) {
            best_cost = c;
            best = current;
        }
    }
    return {best_cost, best};
}

QTable rvi_q_star(const Mdp& mdp, std::pair<State, Action> ref_pair, double tol, long max_iter) {
    const auto [ri, ru] = ref_pair;
    if (ri >= mdp.num_states() || ru >= mdp.num_actions()) {
        throw IndexError("rvi_q_star: reference pair out of range");
    }
    constexpr double kRelax = 0.5;
    QTable q = QTable::zeros_like(mdp);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        const auto minima = state_minima(q);
        const double offset = q(ri, ru);
        residual = 0.0;
        QTable next(mdp.num_states(), mdp.num_actions());
        for (State i = 0; i < mdp.num_states(); ++i) {
            for (Action u = 0; u < mdp.num_actions(); ++u) {
                const double target = mdp.cost(i, u) + full_expectation(mdp, i, u, minima) - offset;
                residual = std::max(residual, std::abs(target - q(i, u)));
                next(i, u) = (1.0 - kRelax) * q(i, u) + kRelax * target;
            }
        }
        if (residual <= tol) return q;
        q = std::move(next);
    }
    throw NonConvergence("rvi_q_star did not converge", residual, max_iter);
}

QTable ssp_fixed_point(const Mdp& mdp, double lambda, double tol, long max_iter,
                       const QTable* warm_start) {
    QTable q = warm_start != nullptr ? *warm_start : QTable::zeros_like(mdp);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        auto next = ssp_bellman_q(mdp, q, lambda);
        residual = sup_distance(next, q);
        q = std::move(next);
        if (residual <= tol) return q;
    }
    throw NonConvergence("ssp fixed point iteration did not converge", residual, max_iter);
}

QTable ssp_q_star(const Mdp& mdp, double beta, double tol) {
    return ssp_fixed_point(mdp, beta, tol);
}

WeightedNorm contraction_weights(const Mdp& mdp, std::size_t samples, std::uint64_t seed) {
    const std::size_t d = mdp.num_states();
    const std::size_t r = mdp.num_actions();

    // mu increases monotonically from 1 to the worst-case hitting time.
    std::vector<double> mu(d, 1.0);
    constexpr long kMaxIter = 10000000;
    bool converged = false;
    for (long it = 0; it < kMaxIter; ++it) {
        std::vector<double> next(d);
        for (State i = 0; i < d; ++i) {
            double best = 0.0;
            for (Action u = 0; u < r; ++u) best = std::max(best, truncated_expectation(mdp, i, u, mu));
            next[i] = 1.0 + best;
        }
        const double change = sup_diff(next, mu);
        const double scale = *std::max_element(next.begin(), next.end());
        mu = std::move(next);
        if (change <= 1e-14 * scale) {
            converged = true;
            break;
        }
        if (!std::isfinite(scale) || scale > 1e15) break;
    }
    if (!converged) {
        throw Error("contraction_weights: hitting times diverge (some policy is improper)");
    }

    WeightedNorm norm;
    norm.num_states = d;
    norm.num_actions = r;
    norm.hitting = mu;
    norm.weights.resize(d * r);
    for (State i = 0; i < d; ++i) {
        for (Action u = 0; u < r; ++u) norm.weights[i * r + u] = 1.0 + truncated_expectation(mdp, i, u, mu);
    }
    std::vector<double> row_max(d, 0.0);
    for (State j = 0; j < d; ++j) {
        for (Action v = 0; v < r; ++v) row_max[j] = std::max(row_max[j], norm.weights[j * r + v]);
    }
    for (State i = 0; i < d; ++i) {
        for (Action u = 0; u < r; ++u) {
            norm.alpha = std::max(norm.alpha,
                                  truncated_expectation(mdp, i, u, row_max) / norm.weight(i, u));
        }
    }

    Rng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        QTable a = QTable::zeros_like(mdp);
        QTable b = QTable::zeros_like(mdp);
        const double spread = std::exp(8.0 * rng.uniform() - 4.0);
        for (std::size_t k = 0; k < a.size(); ++k) {
            a.values()[k] = spread * (2.0 * rng.uniform() - 1.0) * norm.weights[k];
            // Every other pair shares most entries, which probes single-row differences.
            b.values()[k] = (s % 2 == 1 && rng.uniform() < 0.8)
                                ? a.values()[k]
                                : spread * (2.0 * rng.uniform() - 1.0) * norm.weights[k];
        }
        const double lambda = 4.0 * rng.uniform() - 2.0;
        const double denom = weighted_norm([&] {
            QTable diff = a;
            for (std::size_t k = 0; k < diff.size(); ++k) diff.values()[k] -= b.values()[k];
            return diff;
        }(), norm);
        if (denom == 0.0) continue;
        const QTable fa = ssp_bellman_q(mdp, a, lambda);
        const QTable fb = ssp_bellman_q(mdp, b, lambda);
        QTable diff = fa;
        for (std::size_t k = 0; k < diff.size(); ++k) diff.values()[k] -= fb.values()[k];
        const double ratio = weighted_norm(diff, norm) / denom;
        norm.certified_ratio = std::max(norm.certified_ratio, ratio);
    }
    if (norm.certified_ratio > norm.alpha + 1e-9) {
        throw Error("contraction_weights: sampled ratio " + format_double(norm.certified_ratio) +
                    " exceeds alpha " + format_double(norm.alpha));
    }
    return norm;
}

// ---------------------------------------------------------------------------

SolveResult solve_exact(const Mdp& mdp, const SolveOptions& options) {
    SolveResult res;
    const double g = default_projection_radius(mdp);
    res.beta = optimal_average_cost_bisection(mdp, g, options.tol);
    res.v_star = ssp_value_iteration(mdp, res.beta, options.tol, options.max_iter);
    res.q_star_ssp = ssp_q_star(mdp, res.beta, options.tol);
    res.q_star_rvi = rvi_q_star(mdp, {mdp.ref_state(), 0}, options.tol, options.max_iter);
    res.beta_rvi = res.q_star_rvi(mdp.ref_state(), 0);

    const auto coupled =
        coupled_vi(mdp, default_coupled_schedule(mdp), options.tol, options.max_iter);
    res.beta_coupled = coupled.lambda;
    res.iterations = coupled.iterations;

    std::vector<double> betas{res.beta, res.beta_coupled, res.beta_rvi};
    res.beta_enumeration = std::numeric_limits<double>::quiet_NaN();
    try {
        res.beta_enumeration = policy_enumeration_oracle(mdp).first;
        betas.push_back(res.beta_enumeration);
    } catch (const SizeError&) {
    }
    for (std::size_t a = 0; a < betas.size(); ++a) {
        for (std::size_t b = a + 1; b < betas.size(); ++b) {
            res.max_disagreement = std::max(res.max_disagreement, std::abs(betas[a] - betas[b]));
        }
    }

    res.residual = std::max(sup_distance(ssp_bellman_q(mdp, res.q_star_ssp, res.beta), res.q_star_ssp),
                            coupled.residual);
    res.norm = contraction_weights(mdp, options.certificate_samples);
    return res;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double to_number(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json table_json(const QTable& q) {
    json rows = json::array();
    for (State i = 0; i < q.num_states(); ++i) {
        json row = json::array();
        for (Action u = 0; u < q.num_actions(); ++u) row.push_back(q(i, u));
        rows.push_back(std::move(row));
    }
    return rows;
}

QTable table_from_json(const json& rows) {
    const std::size_t d = rows.size();
    const std::size_t r = d ? rows.at(0).size() : 0;
    std::vector<double> vals;
    for (const auto& row : rows) {
        if (row.size() != r) throw ParseError("ragged Q-table", 0);
        for (const auto& x : row) vals.push_back(x.get<double>());
    }
    return {d, r, std::move(vals)};
}

}  // namespace

void write_solve_result(std::ostream& out, const SolveResult& res) {
    json j;
    j["format"] = "avgq-solve";
    j["version"] = 1;
    j["beta"] = res.beta;
    j["beta_coupled"] = res.beta_coupled;
    j["beta_rvi"] = res.beta_rvi;
    j["beta_enumeration"] = number(res.beta_enumeration);
    j["max_disagreement"] = res.max_disagreement;
    j["iterations"] = res.iterations;
    j["residual"] = res.residual;
    j["v_star"] = res.v_star.v;
    j["q_star_ssp"] = table_json(res.q_star_ssp);
    j["q_star_rvi"] = table_json(res.q_star_rvi);
    j["alpha"] = res.norm.alpha;
    j["certified_ratio"] = res.norm.certified_ratio;
    j["hitting_times"] = res.norm.hitting;
    QTable w(res.norm.num_states, res.norm.num_actions, res.norm.weights);
    j["weights"] = table_json(w);
    out << j.dump(2) << '\n';
}

SolveResult read_solve_result(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("solve result: ") + e.what(), 0);
    }
    try {
        if (j.at("format") != "avgq-solve" || j.at("version") != 1) {
            throw ParseError("not an avgq-solve v1 document", 0);
        }
        SolveResult res;
        res.beta = j.at("beta").get<double>();
        res.beta_coupled = j.at("beta_coupled").get<double>();
        res.beta_rvi = j.at("beta_rvi").get<double>();
        res.beta_enumeration = to_number(j.at("beta_enumeration"));
        res.max_disagreement = j.at("max_disagreement").get<double>();
        res.iterations = j.at("iterations").get<long>();
        res.residual = j.at("residual").get<double>();
        res.v_star.v = j.at("v_star").get<std::vector<double>>();
        res.q_star_ssp = table_from_json(j.at("q_star_ssp"));
        res.q_star_rvi = table_from_json(j.at("q_star_rvi"));
        res.norm.alpha = j.at("alpha").get<double>();
        res.norm.certified_ratio = j.at("certified_ratio").get<double>();
        res.norm.hitting = j.at("hitting_times").get<std::vector<double>>();
        const QTable w = table_from_json(j.at("weights"));
        res.norm.num_states = w.num_states();
        res.norm.num_actions = w.num_actions();
        res.norm.weights.assign(w.values().begin(), w.values().end());
        return res;
    } catch (const json::exception& e) {
        throw ParseError(std::string("solve result: ") + e.what(), 0);
    }
}

}  // namespace avgq
