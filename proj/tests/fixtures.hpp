#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "avgq/mdp.hpp"
#include "avgq/rng.hpp"
#include "avgq/solvers.hpp"

namespace fixtures {

/// 0 -> 1 -> 0 with costs 1 and 3; average cost 2.
inline avgq::Mdp cycle2() { return avgq::Mdp(2, 1, {0, 1, 1, 0}, {1, 3}); }

/// Single state, two actions with costs 2 and 5.
inline avgq::Mdp one_state() { return avgq::Mdp(1, 2, {1, 1}, {2, 5}); }

inline avgq::Mdp dense42() { return avgq::generate_dense_random_mdp(20, 5, 42); }
inline avgq::Mdp sparse7() { return avgq::generate_sparse_random_mdp(20, 5, 0.5, 7); }

inline avgq::QTable random_table(std::size_t d, std::size_t r, avgq::Rng& rng, double scale = 10.0) {
    avgq::QTable q(d, r);
    for (auto& x : q.values()) x = scale * (2.0 * rng.uniform() - 1.0);
    return q;
}

/// Average cost of a stationary policy from the lazy chain (I + P)/2, which
/// has the same stationary law and is aperiodic, iterated from i0 until the
/// distribution stops moving. Independent of the library's linear solve.
inline double power_average_cost(const avgq::Mdp& m, const avgq::Policy& pol) {
    const std::size_t d = m.num_states();
    std::vector<double> x(d, 0.0), y(d);
    x[m.ref_state()] = 1.0;
    for (int t = 0; t < 1000000; ++t) {
        for (std::size_t j = 0; j < d; ++j) y[j] = 0.5 * x[j];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) y[j] += 0.5 * x[i] * m.p(i, pol.action[i], j);
        double diff = 0.0;
        for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(y[j] - x[j]));
        x.swap(y);
        if (diff < 1e-16) break;
    }
    double c = 0.0;
    for (std::size_t i = 0; i < d; ++i) c += x[i] * m.cost(i, pol.action[i]);
    return c;
}

/// Best stationary policy cost by exhaustive search over power_average_cost.
inline double brute_force_beta(const avgq::Mdp& m) {
    const std::size_t d = m.num_states(), r = m.num_actions();
    avgq::Policy pol{std::vector<avgq::Action>(d, 0)};
    double best = INFINITY;
    for (;;) {
        best = std::min(best, power_average_cost(m, pol));
        std::size_t k = 0;
        while (k < d && ++pol.action[k] == r) pol.action[k++] = 0;
        if (k == d) break;
    }
    return best;
}

}  // namespace fixtures
