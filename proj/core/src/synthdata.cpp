#include "subgroupte/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "subgroupte/rng.hpp"

namespace subgroupte {

namespace {

constexpr std::size_t kCovariates = 10;
constexpr std::size_t kChunk = 1024;  // substream granularity; fixed so ordering
                                      // is independent of any parallel schedule

double draw_coefficient(Rng& rng) {
    const double u = uniform_in(rng, 0.0, 1.0);
    if (u < 0.6) return 0.0;
    if (u < 0.7) return 0.1;
    if (u < 0.8) return 0.2;
    if (u < 0.9) return 0.3;
    return 0.4;
}

}  // namespace

void GenConfig::validate() const {
    if (n == 0) throw std::invalid_argument("GenConfig: n must be >= 1");
    if (n_treated > n)
        throw std::invalid_argument("GenConfig: n_treated (" + std::to_string(n_treated) +
                                    ") exceeds n (" + std::to_string(n) + ")");
    if (!(x0_std > 0.0) || !std::isfinite(x0_std))
        throw std::invalid_argument("GenConfig: x0_std must be finite and > 0");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
        throw std::invalid_argument("GenConfig: noise_var must be finite and >= 0");
    if (!std::isfinite(x0_mean)) throw std::invalid_argument("GenConfig: x0_mean must be finite");
}

std::vector<double> sample_coefficients(std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> beta(kCovariates - 1);
    for (double& b : beta) b = draw_coefficient(rng);
    return beta;
}

SyntheticDataset generate(const GenConfig& cfg) {
    cfg.validate();

    SyntheticDataset out;
    out.seed = cfg.seed;
    out.beta = sample_coefficients(derive_seed(cfg.seed, 0));

    Dataset& d = out.data;
    d.n = cfg.n;
    d.p = kCovariates;
    d.id.resize(cfg.n);
    d.x.resize(cfg.n * kCovariates);
    d.t.assign(cfg.n, 0);
    d.y.resize(cfg.n);
    d.has_oracle = true;
    d.y0.resize(cfg.n);
    d.y1.resize(cfg.n);
    d.te.resize(cfg.n);

    const double noise_std = std::sqrt(cfg.noise_var);
    for (std::size_t start = 0; start < cfg.n; start += kChunk) {
        Rng rng = make_rng(derive_seed(cfg.seed, 2 + start / kChunk));
        const std::size_t stop = std::min(start + kChunk, cfg.n);
        for (std::size_t i = start; i < stop; ++i) {
            double* xi = d.x.data() + i * kCovariates;
            xi[0] = normal_draw(rng, cfg.x0_mean, cfg.x0_std);
            for (std::size_t j = 1; j < kCovariates; ++j) xi[j] = normal_draw(rng, 0.0, 1.0);

            double xb = 0.0;
            for (std::size_t j = 1; j < kCovariates; ++j) xb += xi[j] * out.beta[j - 1];
            const double s = logistic(xi[0] + 9.0);
            const double e0 = noise_std > 0.0 ? normal_draw(rng, 0.0, noise_std) : 0.0;
            const double e1 = noise_std > 0.0 ? normal_draw(rng, 0.0, noise_std) : 0.0;

            d.id[i] = static_cast<std::int64_t>(i) + 1;
            d.y0[i] = xb + s + 5.0 + e0;
            d.y1[i] = xb + 5.0 * s + e1;
            d.te[i] = 4.0 * s - 5.0;
        }
    }

    std::vector<std::size_t> perm(cfg.n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng trng = make_rng(derive_seed(cfg.seed, 1));
    std::shuffle(perm.begin(), perm.end(), trng);
    for (std::size_t i = 0; i < cfg.n_treated; ++i) d.t[perm[i]] = 1;
    for (std::size_t i = 0; i < cfg.n; ++i) d.y[i] = d.t[i] == 1 ? d.y1[i] : d.y0[i];

    return out;
}

}  // namespace subgroupte
