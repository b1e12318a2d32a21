#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "avgq/rng.hpp"

namespace avgq {

using State = std::size_t;
using Action = std::size_t;

/// Provenance of a generated instance. Recorded in the instance file.
struct GeneratorInfo {
    std::string kind = "manual";  // manual | dense | sparse
    std::uint64_t seed = 0;
    double zero_fraction = 0.0;

    bool operator==(const GeneratorInfo&) const = default;
};

/**
Finite controlled Markov chain with running costs.

Transitions are stored row-major as p[(i*r + u)*d + j] and costs as
k[i*r + u]. Construction only checks shapes; stochasticity and properness
are reported by validate_mdp() and check_all_policies_proper().
*/
class Mdp {
public:
    Mdp() = default;
    Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transitions,
        std::vector<double> costs, State ref_state = 0, GeneratorInfo generator = {});

    std::size_t num_states() const noexcept { return d_; }
    std::size_t num_actions() const noexcept { return r_; }
    State ref_state() const noexcept { return i0_; }
    const GeneratorInfo& generator() const noexcept { return gen_; }

    double p(State i, Action u, State j) const noexcept { return p_[(i * r_ + u) * d_ + j]; }
    double cost(State i, Action u) const noexcept { return k_[i * r_ + u]; }

    std::span<const double> row(State i, Action u) const noexcept {
        return {p_.data() + (i * r_ + u) * d_, d_};
    }
    std::span<const double> transitions() const noexcept { return p_; }
    std::span<const double> costs() const noexcept { return k_; }

    double max_abs_cost() const noexcept;
    double min_cost() const noexcept;
    double max_cost() const noexcept;

    bool operator==(const Mdp&) const = default;

private:
    std::size_t d_ = 0;
    std::size_t r_ = 0;
    std::vector<double> p_;
    std::vector<double> k_;
    State i0_ = 0;
    GeneratorInfo gen_;
};

/// Deterministic stationary policy: one action per state.
struct Policy {
    std::vector<Action> action;

    bool operator==(const Policy&) const = default;
};

struct ValidationReport {
    double row_sum_max_deviation = 0.0;
    bool nonneg_ok = true;
    bool proper_ok = true;
    std::vector<std::string> messages;

    bool ok() const noexcept { return messages.empty(); }
};

inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kStationaryTol = 1e-10;

/// Structural problems (shape mismatch) throw DimensionError; everything else
/// is reported.
ValidationReport validate_mdp(const Mdp& mdp);

/**
Adversarial reachability of the reference state. Grows T from {i0} by adding
every state from which all actions put positive mass into T. Reaching every
state means every stationary policy hits i0 with probability one, i.e. all
policies are proper for the SSP reduction and the chain is unichain with
common state i0.
*/
bool check_all_policies_proper(const Mdp& mdp);

/// Transition matrix of the chain induced by a stationary policy (d x d, row-major).
std::vector<double> policy_transition_matrix(const Mdp& mdp, const Policy& policy);

/// Solves pi P = pi, sum(pi) = 1. Throws SolverFailure when the system is
/// singular or the residual exceeds kStationaryTol.
std::vector<double> stationary_distribution(const Mdp& mdp, const Policy& policy);

double average_cost_of_policy(const Mdp& mdp, const Policy& policy);

/// Draws the successor of (i, u) by inverse CDF on one uniform.
State sample_transition(const Mdp& mdp, State i, Action u, Rng& rng);

/// Every p[i][u][j] and k[i][u] drawn uniform on (0,1), rows normalised.
Mdp generate_dense_random_mdp(std::size_t d, std::size_t r, std::uint64_t seed);

/// The dense draw, then entries outside row 0 and column 0 zeroed
/// independently with probability zero_fraction, then rows renormalised.
Mdp generate_sparse_random_mdp(std::size_t d, std::size_t r, double zero_fraction,
                               std::uint64_t seed);

// Text instance format. write→read→write is byte-identical.
void write_mdp(std::ostream& out, const Mdp& mdp);
Mdp read_mdp(std::istream& in);
void save_mdp(const std::string& path, const Mdp& mdp);
Mdp load_mdp(const std::string& path);

std::string format_double(double x);

}  // namespace avgq
