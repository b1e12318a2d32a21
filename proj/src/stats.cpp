#include "avgq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "avgq/errors.hpp"

namespace avgq::stats {

double quantile(std::vector<double> sample, double p) {
    if (sample.empty()) throw SizeError("quantile of empty sample");
    std::sort(sample.begin(), sample.end());
    const double h = (static_cast<double>(sample.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

double median(std::vector<double> sample) { return quantile(std::move(sample), 0.5); }

double mean(std::span<const double> sample) {
    if (sample.empty()) throw SizeError("mean of empty sample");
    return std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(sample.size());
}

double mann_whitney_z(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw SizeError("mann_whitney_z: empty sample");
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(a.size() + b.size());
    for (double x : a) pooled.emplace_back(x, 0);
    for (double x : b) pooled.emplace_back(x, 1);
    std::sort(pooled.begin(), pooled.end());

    const auto n = static_cast<double>(pooled.size());
    double rank_sum_a = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j + 1);
        const auto t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second == 0) rank_sum_a += avg_rank;
        }
        i = j;
    }
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    const double u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(var > 0.0)) return 0.0;
    return (u - n1 * n2 / 2.0) / std::sqrt(var);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::vector<std::size_t> bootstrap_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    return idx;
}

}  // namespace avgq::stats
