#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avgq/mdp.hpp"
#include "avgq/schedule.hpp"

namespace avgq {

/// Q-factors over state-action pairs, row-major q[i*r + u].
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : d_(num_states), r_(num_actions), q_(num_states * num_actions, fill) {}
    QTable(std::size_t num_states, std::size_t num_actions, std::vector<double> values);

    static QTable zeros_like(const Mdp& mdp) { return {mdp.num_states(), mdp.num_actions()}; }

    std::size_t num_states() const noexcept { return d_; }
    std::size_t num_actions() const noexcept { return r_; }
    std::size_t size() const noexcept { return q_.size(); }

    double& operator()(State i, Action u) noexcept { return q_[i * r_ + u]; }
    double operator()(State i, Action u) const noexcept { return q_[i * r_ + u]; }

    std::span<double> values() noexcept { return q_; }
    std::span<const double> values() const noexcept { return q_; }

    /// Minimum over actions in state i.
    double min_at(State i) const noexcept;
    /// Lowest-index minimiser in state i.
    Action argmin_at(State i) const noexcept;
    Policy greedy_policy() const;

    bool same_shape(const QTable& other) const noexcept {
        return d_ == other.d_ && r_ == other.r_;
    }

    bool operator==(const QTable&) const = default;

private:
    std::size_t d_ = 0;
    std::size_t r_ = 0;
    std::vector<double> q_;
};

double sup_distance(const QTable& a, const QTable& b);
double squared_l2_distance(const QTable& a, const QTable& b);

struct ValueFunction {
    std::vector<double> v;
};

/**
Weighted max-norm ||q||_w = max_{i,u} |q(i,u)| / w(i,u) together with the
modulus under which the SSP Bellman operator contracts.
*/
struct WeightedNorm {
    std::vector<double> weights;  // w[i*r + u] >= 1
    std::vector<double> hitting;  // worst-case expected steps to reach i0, per state
    double alpha = 0.0;
    double certified_ratio = 0.0;  // largest sampled ||F q - F q'|| / ||q - q'||
    std::size_t num_states = 0;
    std::size_t num_actions = 0;

    double weight(State i, Action u) const noexcept { return weights[i * num_actions + u]; }
};

double weighted_norm(const QTable& q, const WeightedNorm& norm);

struct SolveResult {
    double beta = 0.0;
    QTable q_star_ssp;
    QTable q_star_rvi;
    ValueFunction v_star;
    long iterations = 0;
    double residual = 0.0;

    // Cross-oracle diagnostics.
    double beta_coupled = 0.0;
    double beta_rvi = 0.0;
    double beta_enumeration = 0.0;  // NaN when the instance is too large to enumerate
    double max_disagreement = 0.0;
    WeightedNorm norm;
};

/// out(i,u) = k(i,u) - lambda + sum_{j != i0} p(j|i,u) min_v q(j,v).
QTable ssp_bellman_q(const Mdp& mdp, const QTable& q, double lambda);

/// One application of the value operator at fixed lambda. The i0 column is
/// dropped from the continuation sum; V(i0) itself is computed, not forced.
std::vector<double> ssp_bellman_v(const Mdp& mdp, std::span<const double> v, double lambda);

struct IterationLog {
    /// Successive differences V_{k+1} - V_k, one vector per iteration, when enabled.
    std::vector<std::vector<double>> increments;
};

ValueFunction ssp_value_iteration(const Mdp& mdp, double lambda, double tol, long max_iter,
                                  IterationLog* log = nullptr);

struct CoupledResult {
    ValueFunction v;
    double lambda = 0.0;
    long iterations = 0;
    double residual = 0.0;
};

/**
Deterministic two-timescale iteration: a full value-iteration sweep at the
current lambda, then lambda += a'(k) * V_k(i0) at steps where the schedule
updates. Stops once the sweep residual and |V(i0)| are both within tol.
*/
CoupledResult coupled_vi(const Mdp& mdp, const StepSchedule& lambda_schedule, double tol,
                         long max_iter);

/// Default lambda schedule for coupled_vi.
StepSchedule default_coupled_schedule(const Mdp& mdp);

double default_projection_radius(const Mdp& mdp);

/// Root of lambda -> V_lambda(i0) on [-g, g]; the map is concave and
/// strictly decreasing (slope <= -1).
double optimal_average_cost_bisection(const Mdp& mdp, double g, double tol);

inline constexpr std::size_t kMaxEnumeratedPolicies = 4096;

/// Brute force over all r^d deterministic stationary policies.
std::pair<double, Policy> policy_enumeration_oracle(const Mdp& mdp);

/**
Relative value iteration on Q-factors,
  Q <- (1 - tau) Q + tau (k + P min Q - Q(i0,u0)),  tau = 1/2.
The relaxation leaves the fixed point unchanged and removes the period-2
oscillation of the undamped map on periodic chains.
*/
QTable rvi_q_star(const Mdp& mdp, std::pair<State, Action> ref_pair, double tol, long max_iter);

/// Fixed point of ssp_bellman_q at lambda (by value iteration from zero).
QTable ssp_fixed_point(const Mdp& mdp, double lambda, double tol, long max_iter = 1000000,
                       const QTable* warm_start = nullptr);

QTable ssp_q_star(const Mdp& mdp, double beta, double tol);

/**
Weights from the worst-case hitting-time recursion
  mu(i) = 1 + max_u sum_{j != i0} p(j|i,u) mu(j),
  w(i,u) = 1 + sum_{j != i0} p(j|i,u) mu(j).
alpha is the exact modulus for these weights,
  alpha = max_{i,u} sum_{j != i0} p(j|i,u) max_v w(j,v) / w(i,u),
and is then checked on `samples` random pairs. Throws Error if any sampled
ratio exceeds alpha + 1e-9.
*/
WeightedNorm contraction_weights(const Mdp& mdp, std::size_t samples = 1000,
                                 std::uint64_t seed = 0x5eed);

struct SolveOptions {
    double tol = 1e-10;
    long max_iter = 10000000;
    double agreement_tol = 1e-6;
    std::size_t certificate_samples = 1000;
};

/// Runs every oracle and records their pairwise disagreement. Does not throw
/// on disagreement; callers compare max_disagreement against their tolerance.
SolveResult solve_exact(const Mdp& mdp, const SolveOptions& options = {});

void write_solve_result(std::ostream& out, const SolveResult& result);
SolveResult read_solve_result(std::istream& in);

}  // namespace avgq
