#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avgq/mdp.hpp"
#include "avgq/schedule.hpp"
#include "avgq/solvers.hpp"

namespace avgq {

enum class Algorithm { Ssp, Rvi };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct BehaviorPolicy {
    enum class Kind { UniformRandom, EpsilonGreedy };
    Kind kind = Kind::UniformRandom;
    double epsilon = 0.1;

    bool operator==(const BehaviorPolicy&) const = default;
};

struct RunConfig {
    Algorithm algorithm = Algorithm::Ssp;
    long total_steps = 200000;
    StepSchedule fast_schedule = StepSchedule::paper_fast();
    StepSchedule slow_schedule = StepSchedule::paper_slow(20, 5);
    double g = 2.0;
    BehaviorPolicy behavior;
    std::uint64_t seed = 0;
    std::optional<QTable> q_init;
    double lambda_init = 0.0;
    std::pair<State, Action> ref_pair{0, 0};
    long checkpoint_stride = 1000;
    /// Additional checkpoint steps, on top of the stride grid.
    std::vector<long> checkpoint_steps;
    bool record_snapshots = false;
    /// First step of the boundedness audit window; 0 disables the running sup.
    long audit_from = 0;

    bool operator==(const RunConfig&) const = default;
};

/// Paper defaults for an instance: fast/slow schedules, g = max|k| + 1.
RunConfig default_run_config(const Mdp& mdp, Algorithm algorithm);

/// Throws ConfigError unless g > max|k|, total_steps >= 0, lambda_init in
/// [-g, g], schedules valid and shapes consistent with the instance.
void validate_config(const RunConfig& config, const Mdp& mdp);

std::string config_to_text(const RunConfig& config);
RunConfig config_from_text(const std::string& text);
/// FNV-1a over the canonical text form.
std::uint64_t config_digest(const RunConfig& config);

/// Exact targets the run is scored against. Any member may be absent.
struct RunTargets {
    std::optional<QTable> q_star;
    std::optional<double> beta;
    std::optional<WeightedNorm> norm;
};

struct Checkpoint {
    long step = 0;
    double sq_l2_error = 0.0;     // ||Q_n - Q*||_2^2, NaN without target
    double weighted_error = 0.0;  // ||Q_n - Q*||_w, NaN without target or norm
    double q_norm = 0.0;          // ||Q_n||_w, NaN without norm
    double lambda = 0.0;          // lambda_n (SSP) or Q_n(i0,u0) (RVI)
    double lambda_error = 0.0;    // lambda - beta, NaN without beta
    long state = -1;              // pair updated at this step; -1 at step 0
    long action = -1;
    double step_size = 0.0;
    std::optional<QTable> snapshot;
};

struct Trace {
    Algorithm algorithm = Algorithm::Ssp;
    std::uint64_t seed = 0;
    std::uint64_t config_digest = 0;
    std::vector<Checkpoint> checkpoints;
    QTable final_q;
    double final_lambda = 0.0;
    long audit_from = 0;
    /// ||Q_N||_w and sup_{n >= N} ||Q_n||_w over every step, N = audit_from.
    double q_norm_at_audit_start = 0.0;
    double q_norm_sup = 0.0;
};

/// Clamp onto [-g, g].
double project_lambda(double lambda, double g);

/// In-place SSP Q-learning update of the single pair (i,u) after observing j.
void ssp_q_update(QTable& q, double lambda, State i, Action u, State j, const Mdp& mdp,
                  double a_n);
QTable ssp_q_step(QTable q, double lambda, State i, Action u, State j, const Mdp& mdp,
                  double a_n);

/// Gamma(lambda + a' * min_v q(i0, v)).
double ssp_lambda_step(const QTable& q, double lambda, double a_slow, double g, State i0);

void rvi_q_update(QTable& q, State i, Action u, State j, const Mdp& mdp, double a_n,
                  std::pair<State, Action> ref_pair);
QTable rvi_q_step(QTable q, State i, Action u, State j, const Mdp& mdp, double a_n,
                  std::pair<State, Action> ref_pair);

/// Chooses Z_n in state i.
Action choose_action(const BehaviorPolicy& behavior, const QTable& q, State i, Rng& rng);

/**
One asynchronous trajectory from X_0 = i0. Step n = 1..total_steps uses
a(n) from the fast schedule on the visited pair. For SSP, lambda moves only
at steps where the slow schedule updates, driven by the pre-update Q_n.
*/
Trace run_async(const Mdp& mdp, const RunConfig& config, const RunTargets& targets = {});

/// Independent replications with seeds derive_seed(config.seed, r), run on up
/// to `jobs` threads. Output order follows the replication index.
std::vector<Trace> run_replications(const Mdp& mdp, const RunConfig& config, std::size_t count,
                                    const RunTargets& targets = {}, std::size_t jobs = 1);

struct MeanFieldResult {
    QTable q;
    double lambda = 0.0;
    long iterations = 0;
    double residual = 0.0;
};

/**
The SSP scheme with every sampled transition replaced by its expectation:
all pairs move together, Q <- Q + a(n) (F(Q, lambda) - Q), with the same
slow lambda recursion. Stops when ||F(Q) - Q||_inf and |min_u Q(i0,u)| are
both within tol.
*/
MeanFieldResult run_mean_field(const Mdp& mdp, const RunConfig& config, double tol,
                               long max_iter);

void write_trace(std::ostream& out, const Trace& trace);
Trace read_trace(std::istream& in);

}  // namespace avgq
