#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avgq/mdp.hpp"
#include "avgq/qlearn.hpp"
#include "avgq/solvers.hpp"

namespace avgq {

/// Fixed point x*(lambda) of the SSP operator at a given lambda.
QTable q_star_of_lambda(const Mdp& mdp, double lambda, double tol,
                        const QTable* warm_start = nullptr);

/// Largest ||x*(l1) - x*(l2)||_w / |l1 - l2| over consecutive grid points.
double estimate_lambda_lipschitz(const Mdp& mdp, const WeightedNorm& norm,
                                 const std::vector<double>& lambda_grid, double tol);

// ---------------------------------------------------------------------------
// SSP vs RVI comparison

struct InstanceDescriptor {
    std::string generator;
    std::uint64_t seed = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
};

struct SeriesPoint {
    long step = 0;
    double ssp_sq_error = 0.0;
    double rvi_sq_error = 0.0;
};

struct ComparisonReport {
    InstanceDescriptor instance;
    std::uint64_t seed = 0;
    double beta = 0.0;
    std::vector<SeriesPoint> series;
    double ssp_initial_error = 0.0;
    double rvi_initial_error = 0.0;
    double ssp_final_error = 0.0;
    double rvi_final_error = 0.0;
    double ssp_min_error = 0.0;
    double rvi_min_error = 0.0;
    double ssp_final_lambda = 0.0;
    double ssp_oscillation = 0.0;
    double rvi_oscillation = 0.0;
};

inline constexpr double kEarlyPhaseFraction = 0.2;

/**
Largest rise of the error from a running minimum to a later value, taken
over the first `early_fraction` of the checkpoints and divided by the
initial error. Zero for a non-increasing series.
*/
double oscillation_metric(const std::vector<double>& errors, double early_fraction = kEarlyPhaseFraction);

/// Runs both algorithms with the same seed and fast schedule. Throws
/// ConfigError when the fast schedules or checkpoint grids differ.
ComparisonReport compare_rvi_ssp(const Mdp& mdp, const RunConfig& ssp_config,
                                 const RunConfig& rvi_config, std::uint64_t seed,
                                 const SolveResult& solved);

struct OscillationStudy {
    std::vector<double> first;   // SSP oscillation metric per seed, first instance
    std::vector<double> second;  // same seeds, second instance
    double z = 0.0;              // Mann-Whitney, first > second
    double p_value = 1.0;
    bool significant = false;    // one-sided at 95%
};

/// SSP oscillation metric on two instances over seeds 0..num_seeds-1.
OscillationStudy oscillation_study(const Mdp& first, const SolveResult& first_solved,
                                   const Mdp& second, const SolveResult& second_solved,
                                   long total_steps, long checkpoint_stride, std::size_t num_seeds,
                                   std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Boundedness

/// K = max over pairs, successors and lambda in [-g, g] of the weighted norm
/// of the one-sample SSP target at Q = 0, i.e. max_{i,u} (|k(i,u)| + g) / w(i,u).
double lemma1_constant(const Mdp& mdp, const WeightedNorm& norm, double g);

/// ||x_N|| + K / (1 - alpha).
double lemma1_bound(double norm_at_start, double K, double alpha);

/**
True iff ||Q_n||_w <= ||Q_N||_w + K/(1-alpha) at every checkpoint n >= N, and
for the running sup when the trace tracked one from step N. ||Q_N|| comes
from the trace's audit start or from a checkpoint at step N; throws
ConfigError when neither exists.
*/
bool lemma1_audit(const Trace& trace, const WeightedNorm& norm, double K, double alpha, long N);

// ---------------------------------------------------------------------------
// Concentration envelopes

struct EnvelopeReport {
    long n0 = 0;
    std::size_t replications = 0;
    double alpha = 0.0;
    double K = 0.0;
    double lemma1_bound = 0.0;
    double initial_error = 0.0;  // mean ||x_{n0} - x*(lambda_{n0})||_w
    std::vector<long> steps;
    std::vector<double> b;        // b_{n0}(n) per checkpoint
    std::vector<double> deltas;
    /// exceedance[c][k]: fraction of replications above the envelope at
    /// checkpoint c for delta k.
    std::vector<std::vector<double>> exceedance;
    std::vector<double> median_error;
    double bootstrap_monotone_fraction = 0.0;

    bool monotone_in_delta = false;
    bool top_delta_zero_at_final = false;
    bool median_non_increasing = false;  // bootstrap fraction >= 0.95

    bool passed() const noexcept {
        return monotone_in_delta && top_delta_zero_at_final && median_non_increasing;
    }
};

/// b_{n0}(n) = sum_{m=n0}^{n} a(m) at each requested n (ascending, >= n0).
std::vector<double> cumulative_step_sums(const StepSchedule& schedule, long n0,
                                         const std::vector<long>& steps);

/// n0 * {1, 2, 4, ...} up to total_steps, plus total_steps itself.
std::vector<long> geometric_checkpoints(long n0, long total_steps);

/// 8 log-spaced points from 0.01 * initial_error to 2 * lemma1 bound.
std::vector<double> default_delta_grid(double initial_error, double bound);

struct ConcentrationOptions {
    std::size_t replications = 200;
    long n0 = 10000;
    std::vector<double> delta_grid;  // empty: default grid
    std::size_t bootstrap_resamples = 1000;
    std::uint64_t bootstrap_seed = 0xb007;
    std::size_t jobs = 1;
};

EnvelopeReport concentration_experiment(const Mdp& mdp, const RunConfig& config,
                                        const SolveResult& solved,
                                        const ConcentrationOptions& options);

struct LambdaEnvelopeReport {
    long n_hat = 0;
    double beta = 0.0;
    std::size_t replications = 0;
    std::vector<long> steps;
    std::vector<double> q10, q50, q90;  // quantiles of |lambda_n - beta|
    double bootstrap_tail_fraction = 0.0;
    bool median_decays = false;
    bool spread_shrinks = false;
    bool tail_non_increasing = false;  // bootstrap fraction >= 0.95

    bool passed() const noexcept { return median_decays && spread_shrinks && tail_non_increasing; }
};

/// Quantiles of |lambda_n - beta| at the checkpoints shared by all traces
/// with step >= n_hat.
LambdaEnvelopeReport lambda_concentration(const std::vector<Trace>& traces, double beta,
                                          long n_hat, std::size_t bootstrap_resamples = 1000,
                                          std::uint64_t bootstrap_seed = 0x1a3b);

// ---------------------------------------------------------------------------
// Report files: <path>.json (versioned summary, lossless) and <path>.csv (series).

void emit_report(const ComparisonReport& report, const std::string& path);
void emit_report(const EnvelopeReport& report, const std::string& path);
void emit_report(const LambdaEnvelopeReport& report, const std::string& path);

ComparisonReport read_comparison_report(const std::string& json_path);
EnvelopeReport read_envelope_report(const std::string& json_path);

}  // namespace avgq
