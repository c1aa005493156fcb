#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

namespace subgroupte {

// K scalar cluster centers over the 1-D pre-subgrouping treatment-effect
// space, kept sorted ascending, plus the Gaussian-kernel bandwidth used for
// the density-based drift correction.
struct Centroids {
    std::vector<double> mu;
    double h = 0.1;

    std::size_t k() const { return mu.size(); }
    void validate() const;  // k >= 1, finite, sorted ascending, h > 0
};

struct Assignment {
    std::vector<std::size_t> labels;
};

// Density-weighted drift correction: for each centroid, Gaussian kernel
// weights over the batch (normalized to sum 1) pull it toward the local mass
// of the te distribution. Returns the adjusted positions mu*.
std::vector<double> kde_adjust(const Centroids& centroids, std::span<const double> te_batch);

// Nearest adjusted centroid; ties break toward the lowest index.
Assignment hard_assign(std::span<const double> te_batch, std::span<const double> mu_star);

// Per-cluster means where non-empty, mu* fallback otherwise; result sorted.
Centroids update_centroids(std::span<const double> te_batch, const Assignment& assignment,
                           std::span<const double> mu_star, double h);

// kde_adjust -> hard_assign -> update_centroids. Network parameters are not
// an input: the E-step touches centroids only.
Centroids e_step(const Centroids& centroids, std::span<const double> te_batch);

// K-quantile initialization at (k + 0.5) / K, linear-interpolation quantiles.
// h <= 0 selects the automatic bandwidth 0.1 * std(te_batch).
Centroids init_centroids(std::span<const double> te_batch, std::size_t K, double h = -1.0);

}  // namespace subgroupte
