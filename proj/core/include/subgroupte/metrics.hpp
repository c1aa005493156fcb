#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "subgroupte/subgroup.hpp"

namespace subgroupte {

// Mean squared error between estimated and true individual effects.
// `root` switches to the square-root form used by some of the literature;
// the squared form is the default.
double pehe(std::span<const double> te_hat, std::span<const double> te_true, bool root = false);

// Absolute error of the estimated average treatment effect.
double eps_ate(std::span<const double> y1_hat, std::span<const double> y0_hat,
               std::span<const double> te_true);

// Linear-interpolation quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

struct SubgroupStats {
    std::size_t n = 0;
    bool present = false;  // false for empty subgroups; stats below are unset
    double mean_te = 0.0;
    double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
};

struct SubgroupSummary {
    std::vector<SubgroupStats> groups;
    // Var(weighted group means) / Var(all); in [0, 1], 0 when Var(all) = 0.
    double between_group_variance_ratio = 0.0;
};

SubgroupSummary subgroup_summary(std::span<const double> te_hat, const Assignment& assignment,
                                 std::size_t K);

}  // namespace subgroupte
