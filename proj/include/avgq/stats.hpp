#pragma once

#include <span>
#include <vector>

#include "avgq/rng.hpp"

namespace avgq::stats {

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> sample, double p);
double median(std::vector<double> sample);
double mean(std::span<const double> sample);

/// One-sided Mann-Whitney test that `a` tends to exceed `b`. Returns the
/// tie-corrected normal-approximation z score.
double mann_whitney_z(std::span<const double> a, std::span<const double> b);

/// Upper-tail standard normal probability.
double normal_sf(double z);

/// Index vector for one bootstrap resample of size n.
std::vector<std::size_t> bootstrap_indices(std::size_t n, Rng& rng);

}  // namespace avgq::stats
