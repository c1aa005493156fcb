#include "subgroupte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subgroupte {

double pehe(std::span<const double> te_hat, std::span<const double> te_true, bool root) {
    if (te_hat.size() != te_true.size())
        throw std::invalid_argument("pehe: length mismatch");
    if (te_hat.empty()) throw std::invalid_argument("pehe: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < te_hat.size(); ++i) {
        const double d = te_hat[i] - te_true[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(te_hat.size());
    return root ? std::sqrt(mse) : mse;
}

double eps_ate(std::span<const double> y1_hat, std::span<const double> y0_hat,
               std::span<const double> te_true) {
    if (y1_hat.size() != y0_hat.size() || y1_hat.size() != te_true.size())
        throw std::invalid_argument("eps_ate: length mismatch");
    if (y1_hat.empty()) throw std::invalid_argument("eps_ate: empty input");
    double est = 0.0, truth = 0.0;
    for (std::size_t i = 0; i < y1_hat.size(); ++i) {
        est += y1_hat[i] - y0_hat[i];
        truth += te_true[i];
    }
    const auto n = static_cast<double>(te_true.size());
    return std::fabs(est / n - truth / n);
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SubgroupSummary subgroup_summary(std::span<const double> te_hat, const Assignment& assignment,
                                 std::size_t K) {
    if (assignment.labels.size() != te_hat.size())
        throw std::invalid_argument("subgroup_summary: assignment length mismatch");
    if (K == 0) throw std::invalid_argument("subgroup_summary: K must be >= 1");
    for (std::size_t l : assignment.labels)
        if (l >= K) throw std::invalid_argument("subgroup_summary: label out of range");

    std::vector<std::vector<double>> groups(K);
    for (std::size_t i = 0; i < te_hat.size(); ++i) groups[assignment.labels[i]].push_back(te_hat[i]);

    SubgroupSummary out;
    out.groups.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        auto& g = groups[k];
        auto& st = out.groups[k];
        st.n = g.size();
        if (g.empty()) continue;
        st.present = true;
        // mean before sorting: a lone subgroup's mean stays bitwise equal to
        // the global mean, so the variance ratio degenerates to exactly 0
        double sum = 0.0;
        for (double v : g) sum += v;
        st.mean_te = sum / static_cast<double>(g.size());
        std::sort(g.begin(), g.end());
        st.p5 = quantile_sorted(g, 0.05);
        st.p25 = quantile_sorted(g, 0.25);
        st.p50 = quantile_sorted(g, 0.50);
        st.p75 = quantile_sorted(g, 0.75);
        st.p95 = quantile_sorted(g, 0.95);
    }

    const auto n = static_cast<double>(te_hat.size());
    if (n > 0) {
        double mean_all = 0.0;
        for (double v : te_hat) mean_all += v;
        mean_all /= n;
        double var_all = 0.0;
        for (double v : te_hat) var_all += (v - mean_all) * (v - mean_all);
        var_all /= n;
        double var_between = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!out.groups[k].present) continue;
            const double w = static_cast<double>(out.groups[k].n) / n;
            const double d = out.groups[k].mean_te - mean_all;
            var_between += w * d * d;
        }
        out.between_group_variance_ratio = var_all > 0.0 ? var_between / var_all : 0.0;
    }
    return out;
}

}  // namespace subgroupte
