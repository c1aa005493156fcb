#include "subgroupte/subgroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "subgroupte/metrics.hpp"

namespace subgroupte {

void Centroids::validate() const {
    if (mu.empty()) throw std::invalid_argument("Centroids: need at least one centroid");
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("Centroids: bandwidth must be finite and > 0");
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!std::isfinite(mu[i])) throw std::invalid_argument("Centroids: non-finite centroid");
        if (i > 0 && mu[i] < mu[i - 1])
            throw std::invalid_argument("Centroids: not sorted ascending");
    }
}

std::vector<double> kde_adjust(const Centroids& centroids, std::span<const double> te_batch) {
    centroids.validate();
    if (te_batch.empty()) throw std::invalid_argument("kde_adjust: empty batch");

    const std::size_t n = te_batch.size();
    std::vector<double> adjusted(centroids.k());
    std::vector<double> logw(n);
    for (std::size_t k = 0; k < centroids.k(); ++k) {
        const double mu = centroids.mu[k];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (te_batch[i] - mu) / centroids.h;
            logw[i] = -0.5 * u * u;
            mx = std::max(mx, logw[i]);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            logw[i] = std::exp(logw[i] - mx);
            sum += logw[i];
        }
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) diff += (logw[i] / sum) * (te_batch[i] - mu);
        adjusted[k] = mu + diff;
    }
    return adjusted;
}

Assignment hard_assign(std::span<const double> te_batch, std::span<const double> mu_star) {
    if (mu_star.empty()) throw std::invalid_argument("hard_assign: no centroids");
    Assignment a;
    a.labels.resize(te_batch.size());
    for (std::size_t i = 0; i < te_batch.size(); ++i) {
        std::size_t best = 0;
        double best_d = std::fabs(te_batch[i] - mu_star[0]);
        for (std::size_t k = 1; k < mu_star.size(); ++k) {
            const double d = std::fabs(te_batch[i] - mu_star[k]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        a.labels[i] = best;
    }
    return a;
}

Centroids update_centroids(std::span<const double> te_batch, const Assignment& assignment,
                           std::span<const double> mu_star, double h) {
    if (assignment.labels.size() != te_batch.size())
        throw std::invalid_argument("update_centroids: assignment length mismatch");
    const std::size_t K = mu_star.size();
    std::vector<double> sum(K, 0.0);
    std::vector<std::size_t> count(K, 0);
    for (std::size_t i = 0; i < te_batch.size(); ++i) {
        const std::size_t k = assignment.labels[i];
        if (k >= K) throw std::invalid_argument("update_centroids: label out of range");
        sum[k] += te_batch[i];
        ++count[k];
    }
    Centroids out;
    out.h = h;
    out.mu.resize(K);
    for (std::size_t k = 0; k < K; ++k)
        out.mu[k] = count[k] > 0 ? sum[k] / static_cast<double>(count[k]) : mu_star[k];
    std::sort(out.mu.begin(), out.mu.end());
    return out;
}

Centroids e_step(const Centroids& centroids, std::span<const double> te_batch) {
    const std::vector<double> mu_star = kde_adjust(centroids, te_batch);
    const Assignment assignment = hard_assign(te_batch, mu_star);
    return update_centroids(te_batch, assignment, mu_star, centroids.h);
}

Centroids init_centroids(std::span<const double> te_batch, std::size_t K, double h) {
    if (K == 0) throw std::invalid_argument("init_centroids: K must be >= 1");
    if (te_batch.size() < K)
        throw std::invalid_argument("init_centroids: need at least K samples, got " +
                                    std::to_string(te_batch.size()));
    std::vector<double> sorted(te_batch.begin(), te_batch.end());
    std::sort(sorted.begin(), sorted.end());

    Centroids c;
    c.mu.resize(K);
    for (std::size_t k = 0; k < K; ++k)
        c.mu[k] = quantile_sorted(sorted, (static_cast<double>(k) + 0.5) / static_cast<double>(K));

    if (h > 0.0) {
        c.h = h;
    } else {
        double mean = 0.0;
        for (double v : sorted) mean += v;
        mean /= static_cast<double>(sorted.size());
        double var = 0.0;
        for (double v : sorted) var += (v - mean) * (v - mean);
        var /= static_cast<double>(sorted.size());
        c.h = std::max(0.1 * std::sqrt(var), 1e-8);
    }
    c.validate();
    return c;
}

}  // namespace subgroupte
