#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "subgroupte/data.hpp"

namespace subgroupte {

// Randomized benchmark with a time covariate driving effect heterogeneity
// through a logistic term. Both potential outcomes are observed, so the
// oracle columns are always populated.
struct GenConfig {
    std::size_t n = 1000;
    std::size_t n_treated = 500;
    std::uint64_t seed = 0;
    double x0_mean = -9.0;
    double x0_std = 3.0;
    double noise_var = 0.1;  // variance of the outcome noise

    void validate() const;
};

struct SyntheticDataset {
    Dataset data;
    std::vector<double> beta;  // coefficients on x1..x9; x0 enters only via the logistic term
    std::uint64_t seed = 0;
};

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Nine coefficients drawn i.i.d. from {0, 0.1, 0.2, 0.3, 0.4} with
// probabilities {0.6, 0.1, 0.1, 0.1, 0.1}.
std::vector<double> sample_coefficients(std::uint64_t seed);

// x0 ~ N(x0_mean, x0_std^2), x1..x9 ~ N(0,1), s = logistic(x0 + 9),
//   Y0 = X_{-0}·beta + s + 5 + e0,   Y1 = X_{-0}·beta + 5s + e1,
// e ~ N(0, noise_var). Exactly n_treated rows get t=1 via a seeded
// permutation; y is the factual arm. The te column stores the
// conditional-mean effect 4s - 5 (the noise-free contrast).
SyntheticDataset generate(const GenConfig& cfg);

}  // namespace subgroupte
